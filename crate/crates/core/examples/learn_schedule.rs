//! Learns element rotation angles and compares the resulting noisy
//! reconstruction loss with a random and the initial schedule.
//!
//! Run with `cargo run --release --example learn_schedule`.

use polartof::ellipsometry::{
    condition_number, learn_schedule_with, mean_relative_error, random_schedule, s_illum, training_set,
    uniform_initialization, LearnConfig, ScheduleInit,
};
use polartof::Result;

fn main() -> Result<()> {
    let cfg = LearnConfig::default();
    let (h, eps) = training_set(cfg.n, 512, cfg.noise_sigma, 99);
    for (name, init) in [("uniform", ScheduleInit::UniformPoincare), ("zeros", ScheduleInit::Zeros)] {
        let out = learn_schedule_with(&LearnConfig { init, ..cfg })?;
        println!(
            "{name:>8} init: loss {:.4e} -> {:.4e}, held-out error {:.4e}",
            out.initial_loss,
            out.best_loss,
            mean_relative_error(&out.schedule, &h, &eps)
        );
    }
    let uniform = uniform_initialization(cfg.n);
    let random = random_schedule(cfg.n, 3);
    println!(
        "  initial uniform schedule: held-out error {:.4e}, condition number {:.3}",
        mean_relative_error(&uniform, &h, &eps),
        condition_number(&uniform, &s_illum())?
    );
    println!(
        "           random schedule: held-out error {:.4e}",
        mean_relative_error(&random, &h, &eps)
    );
    Ok(())
}
