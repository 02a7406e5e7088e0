use quasistab::circuit::{execute_dynamic, NoiseModel, NoiseRegistry, PreparedCircuit};
use quasistab::sampler::stream_for_shot;
use quasistab::steane::*;
use quasistab::tableau::Tableau;
use quasistab::pauli::{Pauli, PauliString};
use std::time::Instant;

fn main() {
    let n = 11usize;
    let reps = 2_000_000u64;

    let mut t = Tableau::new_zero_state(n);
    let start = Instant::now();
    for _ in 0..reps {
        t.apply_h(3).unwrap();
        t.apply_cnot(3, 8).unwrap();
        t.apply_s(8).unwrap();
        t.apply_cnot(8, 3).unwrap();
    }
    println!("gate: {:.1} ns/op", start.elapsed().as_secs_f64() * 1e9 / (4.0 * reps as f64));

    let mut t = Tableau::new_zero_state(n);
    for q in 0..n { t.apply_h(q).unwrap(); }
    let mut rng = stream_for_shot(1, 1);
    let obs = PauliString::single(n, 5, Pauli::Z);
    let start = Instant::now();
    for _ in 0..(reps/4) {
        t.measure_pauli(&obs, &mut rng).unwrap();
        t.apply_h(5).unwrap();
    }
    println!("measure+h: {:.1} ns/op", start.elapsed().as_secs_f64() * 1e9 / (reps/4) as f64);

    let base = encoded_tableau(0);
    let targets = base.stabilizers();
    let start = Instant::now();
    let mut acc = 0.0;
    for _ in 0..(reps / 20) {
        acc += base.projection_probability(&targets).unwrap();
    }
    println!("projection(validated): {:.0} ns/op (acc {acc})", start.elapsed().as_secs_f64() * 1e9 / (reps / 20) as f64);

    let registry = NoiseRegistry::new();
    let circuits = build_syndrome_circuits(&NoiseModel::depolarizing(0.0)).unwrap();
    let prepared: Vec<PreparedCircuit> = circuits.iter().map(|c| PreparedCircuit::new(c, &registry).unwrap()).collect();
    let start = Instant::now();
    let rounds = reps / 200;
    for i in 0..rounds {
        let mut t = base.clone();
        let mut rng = stream_for_shot(2, i);
        for p in &prepared {
            execute_dynamic(p, &mut t, &mut rng, &registry, None).unwrap();
        }
    }
    println!("six syndrome circuits: {:.0} ns", start.elapsed().as_secs_f64() * 1e9 / rounds as f64);

    // Same but with depolarizing noise present (samples rng per slot)
    let circuits = build_syndrome_circuits(&NoiseModel::depolarizing(4e-4)).unwrap();
    let prepared: Vec<PreparedCircuit> = circuits.iter().map(|c| PreparedCircuit::new(c, &registry).unwrap()).collect();
    let start = Instant::now();
    for i in 0..rounds {
        let mut t = base.clone();
        let mut rng = stream_for_shot(2, i);
        for p in &prepared {
            execute_dynamic(p, &mut t, &mut rng, &registry, None).unwrap();
        }
    }
    println!("six noisy syndrome circuits: {:.0} ns", start.elapsed().as_secs_f64() * 1e9 / rounds as f64);
}
