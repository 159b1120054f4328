use jamsim_core::scenario::*;
use jamsim_core::somaed::{run_somaed, IterParams, ParameterFile, ParameterSet, SomaedConfig};
use jamsim_core::unfolding::*;

fn main() {
    let cfg = SystemConfig { b: 32, u: 8, k: 40, t: 8, d: 32, constellation: ConstellationKind::Qpsk, snr_db: 8.0, seed: 1, pilots: PilotMode::Hadamard };
    let samples = make_training_set(&cfg, 64, &[0.0, 4.0, 8.0, 12.0], 20, 1).unwrap();
    let cons = make_constellation::<f64>(cfg.constellation);
    let scfg = SomaedConfig::default();
    let mk = |tau: f64, gamma: f64| ParameterSet {
        iters: (0..20).map(|t| IterParams { tau, gamma, alpha: 1.0, rho: 10f64.powf(2.0 * t as f64 / 19.0) }).collect(),
    };
    let trained = ParameterFile::load(std::path::Path::new("data/params-qpsk-b32-u8-k40.json")).unwrap().parameter_set();
    for (name, p) in [("trained", trained), ("hand", mk(0.025, 0.3))] {
        println!("== {name}: per-(snr,power) mean weighted BCE | mean BER");
        let mut agg: std::collections::BTreeMap<(i64, i64), (f64, f64, u32)> = Default::default();
        for s in &samples {
            let (det, soft) = run_somaed(&s.y, &s.s_t, &cons, &p, &scfg).unwrap();
            let bce = s.weight * sample_bce(&soft.bit_probs, &s.bits);
            let errs = det.bits_hat.iter().zip(&s.bits).filter(|(a, b)| a != b).count();
            let ber = errs as f64 / s.bits.len() as f64;
            let power = s.jammer.split('=').nth(1).map(|x| x.trim_end_matches("dB").parse::<f64>().unwrap_or(-999.0)).unwrap_or(-999.0);
            let e = agg.entry((s.snr_db as i64, power as i64)).or_insert((0.0, 0.0, 0));
            e.0 += bce; e.1 += ber; e.2 += 1;
        }
        for ((snr, pw), (bce, ber, n)) in agg {
            println!("  snr {snr:3} dB, rhoE {pw:4} dB (n={n}): wBCE {:8.3} BER {:9.3e}", bce / n as f64, ber / n as f64);
        }
    }
}
