use motionsurv::motion::{feature_matrix, generate_synthetic_cohort, SyntheticCohortConfig};
use motionsurv::net::{train, NetworkSpec, TrainConfig};
use motionsurv::survival::{concordance_index, TiePolicy};

fn main() {
    let cohort = generate_synthetic_cohort(&SyntheticCohortConfig {
        n_subjects: 300,
        vertex_count: 202,
        frame_count: 20,
        signal_strength: 1.5,
        noise_sd: 0.04,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let x = feature_matrix(&cohort.samples).unwrap();
    let scale = std::env::var("DECODER_INIT_SCALE").unwrap_or_else(|_| "1.0".into());
    let spec = NetworkSpec {
        input_dim: x.ncols(),
        hidden_units: 100,
        latent_dim: 10,
        dropout_rate: 0.2,
        alpha: 0.5,
        l1_penalty: 1e-6,
        learning_rate: 1e-4,
    };
    let trained = train(&spec, &x, &cohort.outcomes, &TrainConfig { epochs: 50, batch_size: 16, seed: 7 }).unwrap();
    let latent = trained.model.latent_codes(&x).unwrap();
    let alive = latent.iter().filter(|v| **v > 0.0).count() as f64 / latent.len() as f64;
    let risks = trained.model.predict_risks(&x).unwrap();
    let c = concordance_index(&risks, &cohort.outcomes, TiePolicy::HalfCredit).unwrap();
    println!(
        "decoder_scale={scale}: latent alive {alive:.2}, loss {:.2} -> {:.2}, apparent C {c:.3}",
        trained.loss_trace.first().unwrap(),
        trained.loss_trace.last().unwrap()
    );
}
