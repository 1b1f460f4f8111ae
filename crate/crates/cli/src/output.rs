//! CSV and summary writers. Every file starts with `#`-prefixed header
//! lines carrying the tool version, config hash, fixture version, and the
//! effective seed, so any artifact can be traced back to its inputs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use fringe_core::fixtures::FIXTURE_VERSION;
use fringe_core::{FringeRecord, ProbabilityField};
use sha2::{Digest, Sha256};

/// Full round-trip precision: 17 significant digits.
pub fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn config_hash(config_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub struct Headers<'a> {
    pub config_sha256: &'a str,
    pub seed: Option<u64>,
}

impl Headers<'_> {
    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fringe {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# config_sha256 = {}", self.config_sha256);
        let _ = writeln!(s, "# fixture_version = {FIXTURE_VERSION}");
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed = {seed}");
        }
        s
    }
}

pub fn write_file(path: &Path, headers: &Headers, body: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, format!("{}{}", headers.render(), body))
}

pub fn pattern_csv(p: &ProbabilityField) -> String {
    let mut s = String::from("x,p,masked\r\n");
    for k in 0..p.len() {
        let _ = writeln!(
            s,
            "{},{},{}\r",
            g17(p.x_at(k)),
            g17(p.values()[k]),
            u8::from(p.mask()[k])
        );
    }
    s
}

pub fn fringe_csv(records: &[FringeRecord]) -> String {
    let mut s = String::from(
        "index,x_peak,window_lo,window_hi,mu2,mu3,skewness,c0,c1,c2,c3,imbalance_r,mask_fraction,usable\r\n",
    );
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{},{},{},{},{}\r",
            g17(r.x_peak),
            g17(r.window.0),
            g17(r.window.1),
            g17(r.mu2),
            g17(r.mu3),
            g17(r.skewness),
            g17(r.poly_fit[0]),
            g17(r.poly_fit[1]),
            g17(r.poly_fit[2]),
            g17(r.poly_fit[3]),
            r.imbalance_r.map(g17).unwrap_or_default(),
            g17(r.mask_fraction),
            u8::from(r.usable()),
        );
    }
    s
}

/// Two-column plot file for one fringe window.
pub fn fringe_window_csv(p: &ProbabilityField, window: (f64, f64)) -> String {
    let mut s = String::from("x,p\r\n");
    for k in 0..p.len() {
        let x = p.x_at(k);
        if x >= window.0 && x <= window.1 && !p.mask()[k] {
            let _ = writeln!(s, "{},{}\r", g17(x), g17(p.values()[k]));
        }
    }
    s
}
