//! Result rows and their CSV encoding.
//!
//! Everything in `results.csv` is reproducible from `(config, seed)` alone;
//! wall-clock measurements go to the separate `timing.csv` so reruns stay
//! byte-identical.

use std::path::Path;

use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str =
    "scheme,p_t_dbm,L_e_db,N,seed,episode,reward_mean,reward_std,runtime_ms,modes";

pub const TIMING_HEADER: &str = "scheme,p_t_dbm,L_e_db,N,seed,episode,runtime_ms";

/// One deterministic result cell. `runtime_ms` is written as zero in
/// `results.csv` (see module docs); real timings live in [`TimingRow`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub p_t_dbm: f64,
    pub l_e_db: f64,
    pub n: usize,
    pub seed: u64,
    pub episode: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    /// Little-endian relay-mode bitmask (bit k set = relay k passive).
    pub modes: usize,
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub scheme: String,
    pub p_t_dbm: f64,
    pub l_e_db: f64,
    pub n: usize,
    pub seed: u64,
    pub episode: usize,
    pub runtime_ms: f64,
}

/// Rounds to six significant digits and prints the shortest representation
/// of the rounded value.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor();
    let p = 10f64.powf(mag - 5.0);
    let rounded = (x / p).round() * p;
    format!("{}", rounded)
}

/// Mode bitmask as a little-endian bitstring of width `n`
/// (`5, n=5 -> "10100"`).
pub fn modes_bitstring(mask: usize, n: usize) -> String {
    (0..n)
        .map(|k| if (mask >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl ResultRow {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            format_sig6(self.p_t_dbm),
            format_sig6(self.l_e_db),
            self.n,
            self.seed,
            self.episode,
            format_sig6(self.reward_mean),
            format_sig6(self.reward_std),
            0,
            modes_bitstring(self.modes, self.n),
        )
    }
}

/// Writes the deterministic results file (UTF-8, exact header, one row per
/// line).
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(RESULTS_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_timing_csv(rows: &[TimingRow], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(48 * (rows.len() + 1));
    text.push_str(TIMING_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scheme,
            format_sig6(r.p_t_dbm),
            format_sig6(r.l_e_db),
            r.n,
            r.seed,
            r.episode,
            format_sig6(r.runtime_ms),
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a results file back into rows (used by tests and the acceptance
/// suite).
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "results csv: unexpected header {:?}",
                other
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(Error::Config(format!("results csv: bad row {}", i + 2)));
        }
        let field = |j: usize| -> Result<f64> {
            parts[j]
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("results csv row {}: {}", i + 2, e)))
        };
        let n: usize = parts[3]
            .parse()
            .map_err(|e| Error::Config(format!("results csv row {}: {}", i + 2, e)))?;
        let modes = parts[9]
            .chars()
            .enumerate()
            .try_fold(0usize, |acc, (k, c)| match c {
                '0' => Ok(acc),
                '1' => Ok(acc | (1 << k)),
                _ => Err(Error::Config(format!(
                    "results csv row {}: bad bitstring",
                    i + 2
                ))),
            })?;
        rows.push(ResultRow {
            scheme: parts[0].to_string(),
            p_t_dbm: field(1)?,
            l_e_db: field(2)?,
            n,
            seed: parts[4]
                .parse()
                .map_err(|e| Error::Config(format!("results csv row {}: {}", i + 2, e)))?,
            episode: parts[5]
                .parse()
                .map_err(|e| Error::Config(format!("results csv row {}: {}", i + 2, e)))?,
            reward_mean: field(6)?,
            reward_std: field(7)?,
            modes,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(2.5), "2.5");
        assert_eq!(format_sig6(0.123456789), "0.123457");
        assert_eq!(format_sig6(-1234567.0), "-1234570");
        assert_eq!(format_sig6(1.000001e-9), "0.000000001");
    }

    #[test]
    fn bitstring_is_little_endian() {
        assert_eq!(modes_bitstring(5, 5), "10100");
        assert_eq!(modes_bitstring(0, 3), "000");
        assert_eq!(modes_bitstring(7, 3), "111");
    }

    #[test]
    fn empty_rows_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", RESULTS_HEADER));
        assert!(parse_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_reproduces_rows() {
        let rows = vec![
            ResultRow {
                scheme: "max_dl".into(),
                p_t_dbm: -10.0,
                l_e_db: 35.0,
                n: 5,
                seed: 3,
                episode: 12,
                reward_mean: 1.23456789,
                reward_std: 0.000123456789,
                modes: 5,
            },
            ResultRow {
                scheme: "dl_only".into(),
                p_t_dbm: 10.0,
                l_e_db: 30.0,
                n: 3,
                seed: 8,
                episode: 0,
                reward_mean: 0.0,
                reward_std: 0.0,
                modes: 0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), rows.len());
        for (p, r) in parsed.iter().zip(&rows) {
            assert_eq!(p.scheme, r.scheme);
            assert_eq!(p.n, r.n);
            assert_eq!(p.seed, r.seed);
            assert_eq!(p.episode, r.episode);
            assert_eq!(p.modes, r.modes);
            // Floats reproduce the 6-significant-digit rounding exactly.
            assert_eq!(p.reward_mean, format_sig6(r.reward_mean).parse::<f64>().unwrap());
            assert_eq!(p.reward_std, format_sig6(r.reward_std).parse::<f64>().unwrap());
        }
    }
}
