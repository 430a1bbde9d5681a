//! Scratch calibration for the budget sweep world (not part of the build).

use router_core::harness::world::{generate_world, WorldSpec};
use router_core::harness::budget_sweep;

fn main() {
    let spec = WorldSpec {
        tasks: 2,
        adapters: 48,
        embed_dim: 16,
        noise_sigma: 0.1,
        seed: 20260810,
        validation_per_task: 200,
        test_per_task: 1,
    };
    let world = generate_world(&spec).unwrap();
    let task = &world.tasks[0];
    println!("affinity row 0 (sorted desc):");
    let mut row = world.affinity[0].clone();
    row.sort_by(|a, b| b.total_cmp(a));
    println!("{:?}", &row[..12]);

    let budgets: Vec<u64> = vec![114, 150, 200, 260, 340, 450, 600, 800, 1100, 1500, 2100, 2900, 4000, 5600, 7600, 9600];
    let evaluator = world.affinity_evaluator();
    let t0 = std::time::Instant::now();
    let rows = budget_sweep(task, &world.pool, &evaluator, &budgets, 100, 7).unwrap();
    println!("sweep took {:?}", t0.elapsed());
    let full = rows.last().unwrap().uniform_mean;
    let target = 0.95 * full;
    println!("full-budget uniform mean = {full:.4}, target = {target:.4}");
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "budget", "uni_mean", "uni_std", "sh_mean", "sh_std");
    for r in &rows {
        println!(
            "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            r.budget, r.uniform_mean, r.uniform_stddev, r.sh_mean, r.sh_stddev
        );
    }
    let b_sh = rows.iter().find(|r| r.sh_mean >= target).map(|r| r.budget);
    let b_u = rows.iter().find(|r| r.uniform_mean >= target).map(|r| r.budget);
    println!("B_sh = {b_sh:?}, B_u = {b_u:?}");
}
