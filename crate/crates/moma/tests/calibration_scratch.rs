//! Temporary calibration probe — deleted before the suite ships.

use moma::engine::{run, Algorithm, RunConfig, SogaBudget};
use moma::localsearch::EpsSchedule;
use moma::metrics::generational_distance;
use moma::problems::ProblemSpec;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
#[ignore]
fn probe_lotz() {
    let mut cfg = RunConfig::default();
    cfg.problem = ProblemSpec::lotz(16);
    cfg.threads = 1;
    cfg.seed = 100;
    for r in 0..6 {
        let mut c = cfg.clone();
        c.seed = cfg.seed + r;
        let out = run(&c).unwrap();
        let oracle = c.problem.make_instance().unwrap().oracle_front().unwrap();
        let gd = generational_distance(&out.archive.objective_rows(), &oracle).unwrap();
        println!(
            "lotz seed={} n_nd={} gd={} evals={} wall={:?}",
            c.seed,
            out.archive.len(),
            gd,
            out.evaluations,
            out.wall
        );
    }
}

#[test]
#[ignore]
fn probe_knapsack_ordering() {
    let oracle = ProblemSpec::knapsack(20, 7)
        .make_instance()
        .unwrap()
        .oracle_front()
        .unwrap();
    println!("knapsack(20,7) oracle front size = {}", oracle.len());

    for (agents, iterations, max_flips) in [(16usize, 5u32, 2usize), (32, 10, 4), (32, 15, 100_000)]
    {
        let mut gd_m = Vec::new();
        let mut gd_n = Vec::new();
        let mut nnd_m = Vec::new();
        let mut nnd_s = Vec::new();
        let mut evals = Vec::new();
        for r in 0..10u64 {
            let mut cfg = RunConfig::default();
            cfg.problem = ProblemSpec::knapsack(20, 7);
            cfg.agents = agents;
            cfg.iterations = iterations;
            cfg.max_flips = max_flips;
            cfg.threads = 1;
            cfg.seed = 500 + r;

            let moma = run(&cfg).unwrap();
            let e = moma.evaluations;
            evals.push(e as f64);

            let mut cfg_n = cfg.clone();
            cfg_n.algorithm = Algorithm::Nsga2;
            cfg_n.iterations = 100_000;
            cfg_n.max_evaluations = Some(e);
            let nsga = run(&cfg_n).unwrap();

            let mut cfg_s = cfg.clone();
            cfg_s.algorithm = Algorithm::SogaFw;
            cfg_s.soga_sweep = 8;
            cfg_s.soga_budget = SogaBudget::SharedAcrossSweep;
            cfg_s.iterations = 100_000;
            cfg_s.max_evaluations = Some(e);
            let soga = run(&cfg_s).unwrap();

            gd_m.push(generational_distance(&moma.archive.objective_rows(), &oracle).unwrap());
            gd_n.push(generational_distance(&nsga.archive.objective_rows(), &oracle).unwrap());
            nnd_m.push(moma.archive.len() as f64);
            nnd_s.push(soga.archive.len() as f64);
        }
        println!(
            "A={agents} I={iterations} F={max_flips}: E~{:.0} gd_moma={:.4} gd_nsga={:.4} ratio={:.3} nnd_moma={:.1} nnd_soga={:.1}",
            mean(&evals),
            mean(&gd_m),
            mean(&gd_n),
            mean(&gd_m) / mean(&gd_n),
            mean(&nnd_m),
            mean(&nnd_s)
        );
    }
}

#[test]
#[ignore]
fn probe_runtime_ratio() {
    for r in 0..3u64 {
        let mut cfg = RunConfig::default();
        cfg.problem = ProblemSpec::resonator(8, 4, 3);
        cfg.agents = 16;
        cfg.iterations = 10;
        cfg.threads = 1;
        cfg.seed = 40 + r;
        let moma = run(&cfg).unwrap();

        let mut cfg_s = cfg.clone();
        cfg_s.algorithm = Algorithm::SogaFw;
        cfg_s.soga_sweep = 8;
        let soga = run(&cfg_s).unwrap();
        println!(
            "seed={} moma wall={:?} evals={} | soga wall={:?} evals={} | wall ratio={:.2} eval ratio={:.2}",
            cfg.seed,
            moma.wall,
            moma.evaluations,
            soga.wall,
            soga.evaluations,
            soga.wall.as_secs_f64() / moma.wall.as_secs_f64(),
            soga.evaluations as f64 / moma.evaluations as f64
        );
    }
}

#[test]
#[ignore]
fn probe_taper() {
    let strategies = [
        ("coarse", EpsSchedule::Constant { eps: 1e-3 }),
        ("fine", EpsSchedule::Constant { eps: 1e-6 }),
        ("taper", EpsSchedule::default()),
    ];
    for cap in [1500u64, 2500, 4000] {
        let mut wins = 0;
        let mut finals = vec![Vec::new(); 3];
        for r in 0..10u64 {
            let mut hv = [0.0f64; 3];
            for (k, (_, eps)) in strategies.iter().enumerate() {
                let mut cfg = RunConfig::default();
                cfg.problem = ProblemSpec::resonator(8, 4, 3);
                cfg.agents = 16;
                cfg.iterations = 40;
                cfg.threads = 1;
                cfg.seed = 900 + r;
                cfg.eps = eps.clone();
                cfg.max_perturbations = Some(cap);
                let out = run(&cfg).unwrap();
                hv[k] = out.trace.last().unwrap().hypervolume;
                finals[k].push(out.trace.last().unwrap().perturbations as f64);
            }
            if hv[2] >= hv[0].max(hv[1]) {
                wins += 1;
            }
            if r < 3 {
                println!(
                    "  cap={cap} seed={r}: coarse={:.6} fine={:.6} taper={:.6}",
                    hv[0], hv[1], hv[2]
                );
            }
        }
        println!(
            "cap={cap}: taper wins {}/10; mean perturbations coarse={:.0} fine={:.0} taper={:.0}",
            wins,
            mean(&finals[0]),
            mean(&finals[1]),
            mean(&finals[2])
        );
    }
}

#[test]
#[ignore]
fn probe_descent_improvements() {
    use moma::localsearch::{local_descent, CompositeObjective, LocalSearchBudget};
    use moma::problems::flip_evaluator;
    use moma::weights::WeightVector;
    use rand::SeedableRng;

    for dims in [[8usize, 4], [10, 6]] {
        let instance = ProblemSpec::resonator(dims[0], dims[1], 3)
            .make_instance()
            .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mask = instance.fixed_mask().clone();
        let mut in_band = 0usize;
        let mut total_steps = 0usize;
        for w in [0.2f64, 0.5, 0.8] {
            for _ in 0..5 {
                let g = moma::genome::Genome::random(&mask, &mut rng);
                let comp =
                    CompositeObjective::new(WeightVector::new(vec![w, 1.0 - w]).unwrap());
                let budget = LocalSearchBudget {
                    eps_loc: 1e-12,
                    max_flips: 100_000,
                };
                let mut ev = flip_evaluator(instance.problem(), g);
                let report = local_descent(ev.as_mut(), &comp, &budget).unwrap();
                let mut prev = f64::NAN;
                for step in &report.steps {
                    if !prev.is_nan() {
                        let rel = (prev - step.composite).abs() / prev.abs().max(1e-300);
                        if (1e-6..1e-3).contains(&rel) {
                            in_band += 1;
                        }
                    }
                    prev = step.composite;
                }
                total_steps += report.steps.len();
            }
        }
        println!(
            "{}x{}: {} of {} accepted steps have relative improvement in [1e-6,1e-3)",
            dims[0], dims[1], in_band, total_steps
        );
    }
}
