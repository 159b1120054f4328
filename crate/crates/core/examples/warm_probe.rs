use jamsim_core::scenario::*;
use jamsim_core::somaed::{ParameterSet, SomaedConfig};
use jamsim_core::unfolding::*;

fn main() {
    let cfg = SystemConfig { b: 32, u: 8, k: 40, t: 8, d: 32, constellation: ConstellationKind::Qpsk, snr_db: 8.0, seed: 1, pilots: PilotMode::Hadamard };
    let samples = make_training_set(&cfg, 64, &[0.0, 4.0, 8.0, 12.0], 20, 1).unwrap();
    let cons = make_constellation::<f64>(cfg.constellation);
    let scfg = SomaedConfig::default();
    let refs: Vec<_> = samples.iter().collect();
    let warm = bb_calibrated_init(&samples, &cons, 20).unwrap();
    println!("warm taus: {:?}", warm.iters.iter().map(|p| (p.tau * 1e3).round() / 1e3).collect::<Vec<_>>());
    println!("warm loss: {:.3}  (default: {:.3})",
        bce_loss(&warm, &refs, &cons, &scfg).unwrap(),
        bce_loss(&ParameterSet::default_init(20), &refs, &cons, &scfg).unwrap());
    for (lr, epochs) in [(0.01, 30usize)] {
        let opts = TrainOpts { epochs, lr, t_max: 20, seed: 3, val_fraction: 0.2, ..Default::default() };
        let run = train(&warm, &samples, &cons, &opts).unwrap();
        println!("warm-trained lr {lr}: init {:.3} best {:.3}", run.init_loss, run.best_loss);
        let file = jamsim_core::somaed::ParameterFile::new(cfg.constellation, cfg.b, cfg.u, cfg.k, &run.best);
        file.save(std::path::Path::new("/tmp/warm_params.json")).unwrap();
    }
}
