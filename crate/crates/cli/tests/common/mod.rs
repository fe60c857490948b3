#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_insident"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("INSIDENT_THREADS")
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn rate(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> String {
    format!("{:.2}", rng.gen_range(lo..=hi))
}

/// Rows shaped like the 10% KDD Cup 1999 file: same 42 columns and label
/// vocabulary, a large duplicated `smurf.`/`neptune.` majority, about 20%
/// `normal.` and a thin tail of other attacks.
pub fn kdd_like(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let services = ["http", "smtp", "ftp_data", "ftp", "telnet", "finger", "auth", "pop_3", "urp_i", "other"];
    let mut out = String::with_capacity(n * 120);
    for _ in 0..n {
        let draw: f64 = rng.gen();
        let mut c: Vec<String> = vec!["0".into(); 41];
        let label = if draw < 0.57 {
            c[1] = "icmp".into();
            c[2] = "ecr_i".into();
            c[3] = "SF".into();
            c[4] = if rng.gen_bool(0.8) { "1032" } else { "520" }.into();
            c[22] = "511".into();
            c[23] = "511".into();
            c[28] = "1.00".into();
            c[31] = "255".into();
            c[32] = "255".into();
            c[33] = "1.00".into();
            c[35] = "1.00".into();
            "smurf."
        } else if draw < 0.79 {
            c[1] = "tcp".into();
            c[2] = if rng.gen_bool(0.7) { "private" } else { *services.choose(&mut rng).unwrap() }.into();
            c[3] = "S0".into();
            c[22] = rng.gen_range(100..=511).to_string();
            c[23] = rng.gen_range(1..=25).to_string();
            c[24] = "1.00".into();
            c[25] = "1.00".into();
            c[28] = rate(&mut rng, 0.0, 0.1);
            c[29] = rate(&mut rng, 0.0, 0.1);
            c[31] = "255".into();
            c[32] = rng.gen_range(1..=25).to_string();
            c[33] = rate(&mut rng, 0.0, 0.1);
            c[34] = rate(&mut rng, 0.0, 0.1);
            c[37] = "1.00".into();
            c[38] = "1.00".into();
            "neptune."
        } else if draw < 0.99 {
            let udp = rng.gen_bool(0.15);
            c[1] = if udp { "udp" } else { "tcp" }.into();
            c[2] = if udp { "domain_u".into() } else { services[..4].choose(&mut rng).unwrap().to_string() };
            c[3] = "SF".into();
            c[0] = if rng.gen_bool(0.1) { rng.gen_range(1..3000).to_string() } else { "0".into() };
            c[4] = rng.gen_range(40..5000).to_string();
            c[5] = if udp { rng.gen_range(40..200).to_string() } else { rng.gen_range(0..60000).to_string() };
            c[11] = if udp { "0" } else { "1" }.into();
            c[22] = rng.gen_range(1..=30).to_string();
            c[23] = rng.gen_range(1..=40).to_string();
            c[28] = "1.00".into();
            c[30] = rate(&mut rng, 0.0, 0.3);
            c[31] = rng.gen_range(1..=255).to_string();
            c[32] = "255".into();
            c[33] = "1.00".into();
            c[35] = rate(&mut rng, 0.0, 0.05);
            c[36] = rate(&mut rng, 0.0, 0.05);
            "normal."
        } else {
            let kind = rng.gen_range(0..4);
            match kind {
                0 => {
                    c[1] = "tcp".into();
                    c[2] = "http".into();
                    c[3] = "SF".into();
                    c[4] = "54540".into();
                    c[5] = rng.gen_range(7000..9000).to_string();
                    c[9] = "2".into();
                    c[11] = "1".into();
                    c[12] = "1".into();
                }
                1 => {
                    c[1] = "tcp".into();
                    c[2] = services.choose(&mut rng).unwrap().to_string();
                    c[3] = "REJ".into();
                    c[22] = rng.gen_range(1..10).to_string();
                    c[26] = "1.00".into();
                    c[27] = "1.00".into();
                    c[29] = "1.00".into();
                    c[39] = "1.00".into();
                }
                2 => {
                    c[1] = "icmp".into();
                    c[2] = "eco_i".into();
                    c[3] = "SF".into();
                    c[4] = "18".into();
                    c[31] = rng.gen_range(1..100).to_string();
                    c[33] = "1.00".into();
                    c[35] = "1.00".into();
                    c[36] = rate(&mut rng, 0.2, 0.6);
                }
                _ => {
                    c[1] = "udp".into();
                    c[2] = "private".into();
                    c[3] = "SF".into();
                    c[6] = "0".into();
                    c[7] = rng.gen_range(1..=3).to_string();
                    c[4] = "28".into();
                }
            }
            ["back.", "satan.", "ipsweep.", "teardrop."][kind]
        };
        for v in &c {
            out.push_str(v);
            out.push(',');
        }
        let _ = writeln!(out, "{label}");
    }
    out
}
