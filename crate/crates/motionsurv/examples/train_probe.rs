use std::time::Instant;
use motionsurv::motion::{feature_matrix, generate_synthetic_cohort, SyntheticCohortConfig};
use motionsurv::net::{train, NetworkSpec, TrainConfig};
use motionsurv::survival::{concordance_index, TiePolicy};

fn main() {
    let cohort = generate_synthetic_cohort(&SyntheticCohortConfig {
        n_subjects: 300,
        vertex_count: 202,
        frame_count: 20,
        signal_strength: 1.5,
        noise_sd: 0.2,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let x = feature_matrix(&cohort.samples).unwrap();
    println!("features ({} x {}), event fraction {:.3}", x.nrows(), x.ncols(), cohort.realized_event_fraction);

    for (h, lr, epochs) in [(100usize, 1e-3f64, 50usize), (100, 3e-3, 50), (75, 1e-3, 50), (100, 1e-3, 100)] {
        let spec = NetworkSpec {
            input_dim: x.ncols(),
            hidden_units: h,
            latent_dim: 10,
            dropout_rate: 0.2,
            alpha: 0.5,
            l1_penalty: 1e-6,
            learning_rate: lr,
        };
        let t = Instant::now();
        let trained = train(&spec, &x, &cohort.outcomes, &TrainConfig { epochs, batch_size: 16, seed: 7 }).unwrap();
        let dt = t.elapsed();
        let risks = trained.model.predict_risks(&x).unwrap();
        let c = concordance_index(&risks, &cohort.outcomes, TiePolicy::HalfCredit).unwrap();
        let rmin = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = risks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "h={h} lr={lr:.0e} epochs={epochs}: {dt:.1?}, loss {:.1} -> {:.1}, risks [{rmin:.3}, {rmax:.3}], apparent C {c:.3}",
            trained.loss_trace.first().unwrap(),
            trained.loss_trace.last().unwrap(),
        );
    }
}
