use flexlmm::distributions::SkewParameterisation;
use flexlmm::model::{design, ModelSpec, PriorStructure, ReFamily, ShapePrior};
use flexlmm::sampler::{run_chains, ChainOutput, Tuning};
use flexlmm::selection::savage_dickey;
use flexlmm::Parallelism;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const GROUPS: usize = 20;
const PER_GROUP: usize = 3;

fn simulate_symmetric(seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let effect = Normal::new(0.0, 1.5).unwrap();
    let noise = Normal::new(0.0, 0.5).unwrap();
    let u: Vec<f64> = (0..GROUPS).map(|_| effect.sample(&mut rng)).collect();
    DVector::from_fn(GROUPS * PER_GROUP, |i, _| 2.0 + u[i / PER_GROUP] + noise.sample(&mut rng))
}

#[test]
fn symmetric_data_favour_symmetry_on_average() {
    let prior = ShapePrior::Uniform { lo: -1.0, hi: 1.0 };
    let spec = ModelSpec::new(
        design::intercept(GROUPS * PER_GROUP),
        design::one_way(GROUPS, PER_GROUP),
        vec![GROUPS],
        ReFamily::Tpn {
            param: SkewParameterisation::epsilon_skew(),
            prior,
        },
        PriorStructure::standard_diffuse(1),
    )
    .unwrap();
    let replicates = 8;
    let bfs: Vec<f64> = (0..replicates)
        .map(|r| {
            let y = simulate_symmetric(100 + r);
            let chains = run_chains(&spec, &y, 6_000, 1_000, r, 2, &Tuning::default(), Parallelism::Parallel).unwrap();
            let pooled = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
            let pooled = ChainOutput::from_draws(chains[0].names.clone(), pooled, r, 0).unwrap();
            savage_dickey(&pooled, "gamma_1", &prior, 0.0).unwrap().bayes_factor
        })
        .collect();
    let mean = bfs.iter().sum::<f64>() / bfs.len() as f64;
    assert!(mean > 1.0, "mean BF {mean}, replicates {bfs:?}");
}
