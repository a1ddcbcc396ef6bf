// Calibration probe for the learning-advantage experiment.
use wpbr_core::agent::TrainMode;
use wpbr_core::harness::{train_episodes, ExperimentConfig};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.link.p_t_dbm = 0.0;
    cfg.path_loss.direct_extra_attenuation_db = 35.0;
    cfg.train.episodes = 300;
    cfg.train.epochs_per_episode = 10;
    let seeds = [1u64, 2, 3, 4, 5];

    let t_start = std::time::Instant::now();
    for mode in [TrainMode::ModelFree, TrainMode::Simplified, TrainMode::FullOpt] {
        let mut last50 = Vec::new();
        let mut first50_all = Vec::new();
        let mut mode_time = 0.0;
        for &seed in &seeds {
            let t0 = std::time::Instant::now();
            let (rows, timings, _) = train_episodes(&cfg, mode, seed).unwrap();
            mode_time += t0.elapsed().as_secs_f64();
            let m: f64 = rows[250..].iter().map(|r| r.reward_mean).sum::<f64>() / 50.0;
            last50.push(m);
            first50_all.extend(rows[..50].iter().map(|r| r.reward_mean));
            let per_ep: f64 = timings.iter().map(|t| t.runtime_ms).sum::<f64>() / timings.len() as f64;
            println!(
                "  {} seed {}: last50 mean {:.4}, mean episode {:.1} ms",
                mode.label(), seed, m, per_ep
            );
        }
        let mean_last50: f64 = last50.iter().sum::<f64>() / last50.len() as f64;
        let mu: f64 = first50_all.iter().sum::<f64>() / first50_all.len() as f64;
        let std50 = (first50_all.iter().map(|r| (r - mu).powi(2)).sum::<f64>()
            / first50_all.len() as f64).sqrt();
        println!(
            "{}: last-50 mean over seeds {:.4}, first-50 pooled std {:.4}, total {:.1} s",
            mode.label(), mean_last50, std50, mode_time
        );
    }
    println!("calibration total: {:.1} s", t_start.elapsed().as_secs_f64());
}
