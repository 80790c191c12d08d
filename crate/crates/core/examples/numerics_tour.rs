//! Forward-mode duals, finite-difference gradient checks, Adam and SVD
//! least squares on small problems.
//!
//! Run with `cargo run --example numerics_tour`.

use nalgebra::{DMatrix, DVector};
use polartof::numerics::{grad_check, least_squares, AdamState, Dual, FnGrad, Real, SVD_CUTOFF};
use polartof::Result;

fn rosenbrock<T: Real>(x: T, y: T) -> T {
    let one = T::cst(1.0);
    (one - x) * (one - x) + T::cst(100.0) * (y - x * x) * (y - x * x)
}

fn main() -> Result<()> {
    let [x, y] = Dual::<2>::vars(&[-1.2, 1.0]);
    let f = rosenbrock(x, y);
    println!("f(-1.2, 1) = {:.3}, gradient {:?}", f.v, f.g);

    let provider = FnGrad {
        dim: 2,
        f: |p: &[f64]| rosenbrock(p[0], p[1]),
        fg: |p: &[f64]| {
            let [x, y] = Dual::<2>::vars(&[p[0], p[1]]);
            let r = rosenbrock(x, y);
            (r.v, r.g.to_vec())
        },
    };
    println!("gradient check error {:.2e}", grad_check(&provider, &[-1.2, 1.0], 1e-6));

    let mut p = vec![-1.2, 1.0];
    let mut adam = AdamState::new(2, 2e-2);
    for _ in 0..5000 {
        let [x, y] = Dual::<2>::vars(&[p[0], p[1]]);
        adam.update(&mut p, &rosenbrock(x, y).g)?;
    }
    println!("Adam after 5000 steps: ({:.4}, {:.4})", p[0], p[1]);

    let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
    let b = DVector::from_vec(vec![1.0, 3.1, 4.9, 7.0]);
    let fit = least_squares(&a, &b, SVD_CUTOFF);
    println!("line fit: intercept {:.3}, slope {:.3}", fit[0], fit[1]);
    Ok(())
}
