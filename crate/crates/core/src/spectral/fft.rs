//! Thread-local plan cache and n-dimensional transforms.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

type PlanKey = (TypeId, usize, bool);

thread_local! {
    static PLANS: RefCell<HashMap<PlanKey, Box<dyn Any>>> = RefCell::new(HashMap::new());
}

fn plan<T: Scalar>(len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        let entry = map.entry((TypeId::of::<T>(), len, inverse)).or_insert_with(|| {
            let mut planner = FftPlanner::<T>::new();
            let p = if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            };
            Box::new(p)
        });
        entry
            .downcast_ref::<Arc<dyn Fft<T>>>()
            .expect("plan cache keyed by scalar type")
            .clone()
    })
}

fn transpose<T: Copy>(data: &mut [T], scratch: &mut Vec<T>, n: usize) {
    scratch.clear();
    scratch.extend_from_slice(data);
    for i in 0..n {
        for j in 0..n {
            data[j * n + i] = scratch[i * n + j];
        }
    }
}

/// Unnormalized DFT over a `n^dim` row-major buffer, in place.
pub(crate) fn transform<T: Scalar>(data: &mut [Complex<T>], n: usize, dim: usize, inverse: bool) {
    let p = plan::<T>(n, inverse);
    p.process(data);
    if dim == 2 {
        let mut scratch = Vec::with_capacity(data.len());
        transpose(data, &mut scratch, n);
        p.process(data);
        transpose(data, &mut scratch, n);
    }
}
