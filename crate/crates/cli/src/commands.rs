//! One function per subcommand, each returning JSON results and CSV tables.

use std::path::Path;

use hqlab::corpus::{MinNormInstance, RationalCorpus, RationalInstance};
use hqlab::factorization::{factorize, FactorInput, RationalFunction};
use hqlab::findim::{assumption2_search, duality_face, extreme_point_check, norm_corollary_check, FinDimModel};
use hqlab::norms::{bmo_norm, h1_norm, lp_norm, ScaleLadder};
use hqlab::quantities::{eval_quantity, QuantityDescriptor};
use hqlab::spectral::io::{load_field, save_field};
use hqlab::spectral::{apply_multiplier, random_field, Field, GridSpec, MultiplierSymbol};
use hqlab::variational::{lagrange_residual, min_norm_solve, xqstar_bounds, DualBudget, MinNormOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::config::{Resolved, Subcommand};
use crate::report::{num, Table};
use crate::Failure;

pub struct Outcome {
    pub results: Value,
    pub tables: Vec<Table>,
    /// Set when the run finished but missed a tolerance.
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(results: Value, tables: Vec<Table>) -> Self {
        Self { results, tables, failure: None }
    }
}

pub fn dispatch(r: &Resolved) -> Result<Outcome, Failure> {
    match r.subcommand {
        Subcommand::Transform => transform(r),
        Subcommand::Norms => norms(r),
        Subcommand::Quantity => quantity(r),
        Subcommand::Minnorm => minnorm(r),
        Subcommand::Factorize => factorize_cmd(r),
        Subcommand::Findim => findim(r),
    }
}

/// The input field, or a seeded band-limited field on the configured grid.
fn input_field(r: &Resolved, complex: bool) -> Result<Field<f64>, Failure> {
    match &r.input {
        Some(p) => {
            let f = load_field(p)?;
            if let Some(g) = r.grid {
                if g != *f.grid() {
                    return Err(Failure::Validation(format!("{} does not live on the configured grid", p.display())));
                }
            }
            Ok(f)
        }
        None => {
            let g = r.grid()?;
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
            Ok(random_field::<f64, _>(&g, r.band, !complex, &mut rng))
        }
    }
}

fn field_table(name: &str, f: &Field<f64>) -> Table {
    let g = f.grid();
    let mut t = Table::new(name, &["index", "x", "y", "re", "im"]);
    for (i, v) in f.values().iter().enumerate() {
        let [x, y] = g.coords(i);
        t.push(vec![i.to_string(), num(x), num(y), num(v.re), num(v.im)]);
    }
    t
}

fn transform(r: &Resolved) -> Result<Outcome, Failure> {
    let name = r.quantity()?;
    let m: MultiplierSymbol = name.parse()?;
    let f = input_field(r, true)?;
    let out = apply_multiplier(&f, &m)?;
    save_field(r.out.join("transformed.hqf"), &out)?;
    let results = json!({
        "multiplier": m.to_string(),
        "input_l2": f.norm(),
        "output_l2": out.norm(),
        "output_field": "transformed.hqf",
    });
    Ok(Outcome::ok(results, vec![field_table("transformed.csv", &out)]))
}

fn norms(r: &Resolved) -> Result<Outcome, Failure> {
    let f = input_field(r, false)?;
    let g = *f.grid();
    let ladder = ScaleLadder::for_grid(&g);
    let h1 = h1_norm(&f, &ladder)?;
    let depth = g.n().trailing_zeros() as usize;
    let rows = [
        ("l1", lp_norm(&f, 1.0)?),
        ("l2", lp_norm(&f, 2.0)?),
        ("h1", h1.value),
        ("bmo", bmo_norm(&f, depth)?),
    ];
    let mut t = Table::new("norms.csv", &["norm", "value"]);
    for (k, v) in rows {
        t.push(vec![k.into(), num(v)]);
    }
    let mean_ratio = f.mean().norm() * g.volume().sqrt() / f.norm().max(f64::MIN_POSITIVE);
    let results = json!({
        "l1": rows[0].1,
        "l2": rows[1].1,
        "h1": { "value": h1.value, "divergent": h1.divergent || mean_ratio > r.tol("divergence") },
        "bmo": rows[3].1,
        "ladder": { "t_min": ladder.t_min, "levels": ladder.levels },
    });
    Ok(Outcome::ok(results, vec![t]))
}

fn quantity(r: &Resolved) -> Result<Outcome, Failure> {
    let grid = match &r.input {
        Some(p) => *load_field(p)?.grid(),
        None => r.grid()?,
    };
    let d = QuantityDescriptor::parse(r.quantity()?, grid)?;
    let w = input_field(r, d.is_complex())?;
    let q = eval_quantity(&d, &w)?;
    save_field(r.out.join("quantity.hqf"), &q)?;
    let results = json!({
        "quantity": d.to_string(),
        "omega_energy": w.norm_sq(),
        "q_l1": lp_norm(&q, 1.0)?,
        "q_l2": q.norm(),
        "q_mean": q.mean().re,
        "output_field": "quantity.hqf",
    });
    Ok(Outcome::ok(results, vec![field_table("quantity.csv", &q)]))
}

fn minnorm(r: &Resolved) -> Result<Outcome, Failure> {
    let input = r.input.as_deref().ok_or_else(|| Failure::Validation("minnorm needs io.input (instance JSON or HQF1 field)".into()))?;
    let (d, f, certified, name) = if is_json(input) {
        let inst: MinNormInstance = read_json(input)?;
        let built = inst.build()?;
        let certified = built.certified();
        (built.descriptor, built.data, certified, inst.name)
    } else {
        let f = load_field(input)?;
        (QuantityDescriptor::parse(r.quantity()?, *f.grid())?, f, false, input.display().to_string())
    };
    let opts = MinNormOptions { tol: r.tol("residual"), inner_tol: r.tol("inner"), seed: r.seed, ..MinNormOptions::default() };
    let sol = min_norm_solve(&d, &f, &opts)?;
    let budget = DualBudget { tol: r.tol("bounds"), seed: r.seed, ..DualBudget::default() };
    let bounds = xqstar_bounds(&d, &f, &budget, &opts)?;
    let lagrange = if sol.energy > 0.0 { Some(lagrange_residual(&d, &sol.multiplier, &sol.solution)?) } else { None };
    save_field(r.out.join("solution.hqf"), &sol.solution)?;
    save_field(r.out.join("multiplier.hqf"), &sol.multiplier)?;
    let results = json!({
        "instance": name,
        "quantity": d.to_string(),
        "certified": certified,
        "energy": sol.energy,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "lagrange_residual": lagrange,
        "bounds": { "lower": bounds.lower, "upper": finite_or_null(bounds.upper), "terms": bounds.terms, "stagnated": bounds.stagnated },
        "solution_field": "solution.hqf",
        "multiplier_field": "multiplier.hqf",
    });
    let mut t = Table::new("minnorm.csv", &["instance", "energy", "residual", "lower", "upper", "converged"]);
    t.push(vec![name, num(sol.energy), num(sol.residual), num(bounds.lower), num(bounds.upper), sol.converged.to_string()]);
    let failure = (!sol.converged).then(|| format!("residual {:e} above tolerance {:e}", sol.residual, opts.tol));
    Ok(Outcome { results, tables: vec![t], failure })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(p)?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))
}

/// A rational corpus, a single rational function, or an `HQF1` line field.
fn factor_inputs(r: &Resolved) -> Result<(Vec<(String, FactorInput)>, GridSpec), Failure> {
    let input = r.input.as_deref().ok_or_else(|| Failure::Validation("factorize needs io.input".into()))?;
    if !is_json(input) {
        let f = load_field(input)?;
        let g = *f.grid();
        return Ok((vec![(input.display().to_string(), FactorInput::Sampled { f, search: None })], g));
    }
    let value: Value = read_json(input)?;
    if value.get("instances").is_some() {
        let corpus: RationalCorpus = serde_json::from_value(value).map_err(|e| Failure::Validation(e.to_string()))?;
        let g = match r.grid {
            Some(g) => g,
            None => corpus.grid.spec()?,
        };
        let items = corpus.instances.into_iter().map(|RationalInstance { name, function }| (name, FactorInput::Rational(function))).collect();
        Ok((items, g))
    } else {
        let u: RationalFunction = serde_json::from_value(value).map_err(|e| Failure::Validation(e.to_string()))?;
        Ok((vec![(input.display().to_string(), FactorInput::Rational(u))], r.grid()?))
    }
}

fn factorize_cmd(r: &Resolved) -> Result<Outcome, Failure> {
    let (items, g) = factor_inputs(r)?;
    let tol = r.tol("residual");
    let mut t = Table::new(
        "factorization.csv",
        &["name", "residual_l1", "is_square", "blaschke_degree", "hilbert_consistency", "blaschke_modulus_error", "square_attempt_residual"],
    );
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (name, input) in &items {
        let res = factorize(input, &g, f64::INFINITY)?;
        if !(res.residual_l1 <= tol) {
            bad.push(name.clone());
        }
        if items.len() == 1 {
            save_field(r.out.join("omega.hqf"), &res.omega)?;
            save_field(r.out.join("gamma.hqf"), &res.gamma)?;
        }
        t.push(vec![
            name.clone(),
            num(res.residual_l1),
            res.is_square.to_string(),
            res.blaschke_degree.to_string(),
            num(res.hilbert_consistency),
            num(res.blaschke_modulus_error),
            res.square_attempt_residual.map(num).unwrap_or_default(),
        ]);
        rows.push(json!({
            "name": name,
            "residual_l1": res.residual_l1,
            "is_square": res.is_square,
            "blaschke_degree": res.blaschke_degree,
            "zeros": res.zero_report,
            "hilbert_consistency": res.hilbert_consistency,
            "blaschke_modulus_error": res.blaschke_modulus_error,
            "square_attempt_residual": res.square_attempt_residual,
        }));
    }
    let failure = (!bad.is_empty()).then(|| format!("residual above {tol:e} for {}", bad.join(", ")));
    Ok(Outcome { results: json!({ "tolerance": tol, "instances": rows }), tables: vec![t], failure })
}

fn findim(r: &Resolved) -> Result<Outcome, Failure> {
    let (model, trials, samples) = match (&r.input, &r.findim) {
        (Some(p), sec) => (read_json::<FinDimModel>(p)?, sec.map_or(20, |s| s.trials), sec.map_or(64, |s| s.samples)),
        (None, Some(s)) => (FinDimModel::build(s.n, s.m, r.seed, s.chiral)?, s.trials, s.samples),
        (None, None) => return Err(Failure::Validation("findim needs io.input (model JSON) or a [findim] section".into())),
    };
    std::fs::write(r.out.join("model.json"), serde_json::to_string_pretty(&model).map_err(|e| Failure::Validation(e.to_string()))? + "\n")?;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let b0: Vec<f64> = (0..model.m()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b = model.normalize(&b0)?;
    let face = duality_face(&model, &b, samples)?;
    let (_, vecs) = model.spectrum(&b);
    let omega: Vec<f64> = vecs.column(0).iter().copied().collect();
    let f = model.q(&omega);
    let opts = MinNormOptions { seed: r.seed, ..MinNormOptions::default() };
    let corollary = norm_corollary_check(&model, &f, &opts)?;
    let extreme = extreme_point_check(&model, &f, r.tol("extreme"), &opts)?;
    let search = assumption2_search(&model, trials, r.seed);
    let mut t = Table::new("face.csv", &{
        let mut h = vec!["sample".to_string()];
        h.extend((1..=model.m()).map(|k| format!("q{k}")));
        h.push("vertex".into());
        h
    }.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, s) in face.samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.iter().map(|v| num(*v)));
        row.push(face.hull_vertices.contains(&i).to_string());
        t.push(row);
    }
    let results = json!({
        "n": model.n(),
        "m": model.m(),
        "symmetry": model.symmetry(),
        "labels": model.labels(),
        "spectral_symmetry_defect": model.spectral_symmetry_defect(100, r.seed),
        "face": {
            "b": face.b,
            "fixed_dim": face.fixed_basis.len(),
            "affine_dim": face.affine_dim,
            "hull_vertices": face.hull_vertices.len(),
            "pairing_defect": face.pairing_defect,
        },
        "norm_corollary": {
            "data": f,
            "dual_norm": corollary.dual_norm,
            "decomposition_norm": corollary.decomposition_norm,
            "decomposition_residual": corollary.decomposition_residual,
            "dual_converged": corollary.dual_converged,
            "decomposition_converged": corollary.decomposition_converged,
        },
        "extreme_point": { "extreme": extreme.extreme, "norm": extreme.norm, "preimage_energy": extreme.preimage_energy },
        "assumption2": { "summary": search.summary(), "violations": search.violations.len() },
    });
    let sandwich = corollary.dual_norm <= corollary.decomposition_norm + 1e-6;
    let failure = (!sandwich).then(|| format!("dual norm {} exceeds decomposition norm {}", corollary.dual_norm, corollary.decomposition_norm));
    Ok(Outcome { results, tables: vec![t], failure })
}
