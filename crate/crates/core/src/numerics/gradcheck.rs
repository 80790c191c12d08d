//! Finite-difference verification of differentiable evaluations.

/// Maps a parameter vector to a value and its gradient.
pub trait GradProvider {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// Adapter turning a pair of closures into a [`GradProvider`].
pub struct FnGrad<F, G> {
    pub dim: usize,
    pub f: F,
    pub fg: G,
}

impl<F, G> GradProvider for FnGrad<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> (f64, Vec<f64>),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.fg)(x)
    }
}

/// Step used for coordinate `x`: relative to its magnitude, floored at
/// `rel_step` itself for coordinates near zero.
fn step_for(x: f64, rel_step: f64) -> f64 {
    rel_step * x.abs().max(1.0)
}

/// Central finite-difference gradient.
pub fn finite_difference(f: &dyn GradProvider, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step_for(x[i], rel_step);
            xp[i] = x[i] + h;
            let fp = f.value(&xp);
            xp[i] = x[i] - h;
            let fm = f.value(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Per-coordinate relative error `|g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-12)`.
pub fn relative_errors(ad: &[f64], fd: &[f64]) -> Vec<f64> {
    ad.iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs() / (a.abs() + b.abs() + 1e-12))
        .collect()
}

/// Maximum relative error between the provided gradient and central
/// differences.
pub fn grad_check(f: &dyn GradProvider, x: &[f64], rel_step: f64) -> f64 {
    let (_, ad) = f.value_and_grad(x);
    let fd = finite_difference(f, x, rel_step);
    relative_errors(&ad, &fd).into_iter().fold(0.0, f64::max)
}
