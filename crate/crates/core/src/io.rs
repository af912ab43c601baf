//! Serialization of traces, checkpoints, and PIP tables.
//!
//! Trace files are CSV with `#`-prefixed header lines:
//!
//! ```text
//! # trace v1
//! # seed=42 sampler=madasub kernel=... p=8 T=1000 ...
//! iteration,accept,model,log_kernel
//! 1,1,0f,-12.25
//! ```
//!
//! Models are encoded as fixed-width hex bitstrings with the
//! least-significant bit standing for variable 1. Floats use Rust's
//! shortest-roundtrip formatting, so rewriting a trace is byte-stable.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::ModelIndex;
use crate::parallel::RoundCheckpoint;
use crate::sampler::ChainTrace;

/// Writes a chain trace (header echo, one row per iteration).
pub fn write_trace<W: Write>(w: &mut W, trace: &ChainTrace) -> Result<()> {
    writeln!(w, "# trace v1")?;
    writeln!(w, "# {}", trace.header_echo)?;
    if let Some(t) = trace.stopped_at {
        writeln!(w, "# stopped_at={t}")?;
    }
    writeln!(w, "iteration,accept,model,log_kernel")?;
    for t in 0..trace.len() {
        writeln!(
            w,
            "{},{},{},{}",
            t + 1,
            trace.accept_flags[t] as u8,
            trace.accepted[t].to_hex(),
            trace.log_kernel[t]
        )?;
    }
    Ok(())
}

/// One parsed trace row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub accept: bool,
    pub model: ModelIndex,
    pub log_kernel: f64,
}

/// A trace read back from disk (proposed models are not serialized).
#[derive(Clone, Debug)]
pub struct LoadedTrace {
    pub p: usize,
    pub seed: Option<u64>,
    pub header: String,
    pub stopped_at: Option<usize>,
    pub rows: Vec<TraceRow>,
}

impl LoadedTrace {
    pub fn accepted_models(&self) -> Vec<ModelIndex> {
        self.rows.iter().map(|r| r.model.clone()).collect()
    }

    pub fn accept_flags(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.accept).collect()
    }
}

fn header_field(header: &str, key: &str) -> Option<String> {
    header
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")).map(str::to_string))
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace<R: BufRead>(reader: R) -> Result<LoadedTrace> {
    let mut header = String::new();
    let mut stopped_at = None;
    let mut p: Option<usize> = None;
    let mut seed: Option<u64> = None;
    let mut rows = Vec::new();
    let mut saw_columns = false;

    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(t) = header_field(comment, "stopped_at") {
                stopped_at =
                    Some(t.parse().map_err(|_| Error::Parse(format!("bad stopped_at '{t}'")))?);
            }
            if comment.contains("seed=") {
                header = comment.to_string();
                if let Some(v) = header_field(comment, "p") {
                    p = v.parse().ok();
                }
                if let Some(v) = header_field(comment, "seed") {
                    seed = v.parse().ok();
                }
            }
            continue;
        }
        if !saw_columns {
            if line != "iteration,accept,model,log_kernel" {
                return Err(Error::Parse(format!("unexpected column header '{line}'")));
            }
            saw_columns = true;
            continue;
        }
        let p = p.ok_or_else(|| Error::Parse("trace header does not declare p".into()))?;
        let mut fields = line.split(',');
        let mut next = || fields.next().ok_or_else(|| Error::Parse(format!("short row '{line}'")));
        let iteration: u64 = next()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad iteration in '{line}'")))?;
        let accept = match next()? {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("bad accept flag '{other}'"))),
        };
        let model = ModelIndex::from_hex(next()?, p)?;
        let log_kernel: f64 = next()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad log kernel in '{line}'")))?;
        rows.push(TraceRow { iteration, accept, model, log_kernel });
    }

    let p = p.ok_or_else(|| Error::Parse("trace header does not declare p".into()))?;
    Ok(LoadedTrace { p, seed, header, stopped_at, rows })
}

/// Writes round checkpoints: one row per (round, variable) with pooled
/// counts and every worker's jointly updated proposal probability.
pub fn write_checkpoints<W: Write>(w: &mut W, checkpoints: &[RoundCheckpoint]) -> Result<()> {
    writeln!(w, "# checkpoints v1")?;
    let workers = checkpoints.first().map_or(0, |c| c.rbar.len());
    let header: Vec<String> = (1..=workers).map(|k| format!("rbar_w{k}")).collect();
    writeln!(w, "round,variable,total_count,{}", header.join(","))?;
    for c in checkpoints {
        for j in 0..c.total_counts.len() {
            let rbars: Vec<String> = c.rbar.iter().map(|r| r[j].to_string()).collect();
            writeln!(w, "{},{},{},{}", c.round, j + 1, c.total_counts[j], rbars.join(","))?;
        }
    }
    Ok(())
}

/// Writes the PIP table: `variable,name,pip,final_proposal`, with the final
/// proposal column left empty when there is no proposal (exact enumeration).
pub fn write_pip_csv<W: Write>(
    w: &mut W,
    names: &[String],
    pips: &[f64],
    final_proposal: Option<&[f64]>,
) -> Result<()> {
    if names.len() != pips.len() {
        return Err(Error::Config(format!(
            "{} names for {} probabilities",
            names.len(),
            pips.len()
        )));
    }
    if let Some(r) = final_proposal {
        if r.len() != pips.len() {
            return Err(Error::Config(format!(
                "{} final proposals for {} probabilities",
                r.len(),
                pips.len()
            )));
        }
    }
    writeln!(w, "variable,name,pip,final_proposal")?;
    for j in 0..pips.len() {
        let last = final_proposal.map_or(String::new(), |r| r[j].to_string());
        writeln!(w, "{},{},{},{last}", j + 1, names[j], pips[j])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::PosteriorKernel;
    use crate::sampler::{run_madasub, SamplerConfig};

    #[test]
    fn trace_roundtrip_preserves_rows() {
        let kernel = PosteriorKernel::independent_bernoulli(vec![0.3, 0.6, 0.5]).unwrap();
        let cfg = SamplerConfig::new(3, 200, 9);
        let trace = run_madasub(&kernel, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let loaded = read_trace(buf.as_slice()).unwrap();
        assert_eq!(loaded.p, 3);
        assert_eq!(loaded.seed, Some(9));
        assert_eq!(loaded.rows.len(), trace.len());
        for (t, row) in loaded.rows.iter().enumerate() {
            assert_eq!(row.iteration, t as u64 + 1);
            assert_eq!(row.accept, trace.accept_flags[t]);
            assert_eq!(row.model, trace.accepted[t]);
            assert_eq!(row.log_kernel.to_bits(), trace.log_kernel[t].to_bits());
        }
    }

    #[test]
    fn writing_twice_is_byte_identical() {
        let kernel = PosteriorKernel::uniform(4);
        let cfg = SamplerConfig::new(4, 50, 1);
        let trace = run_madasub(&kernel, &cfg).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trace(&mut a, &trace).unwrap();
        write_trace(&mut b, &trace).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_traces_are_rejected() {
        assert!(read_trace("garbage\n".as_bytes()).is_err());
        let missing_p = "# trace v1\niteration,accept,model,log_kernel\n1,1,0,-1\n";
        assert!(read_trace(missing_p.as_bytes()).is_err());
        let bad_flag =
            "# seed=1 p=4\niteration,accept,model,log_kernel\n1,2,0,-1\n";
        assert!(read_trace(bad_flag.as_bytes()).is_err());
    }

    #[test]
    fn pip_csv_shape() {
        let mut buf = Vec::new();
        write_pip_csv(
            &mut buf,
            &["a".into(), "b".into()],
            &[0.25, 0.75],
            Some(&[0.3, 0.7]),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "variable,name,pip,final_proposal");
        assert_eq!(lines[1], "1,a,0.25,0.3");
        assert_eq!(lines[2], "2,b,0.75,0.7");
    }
}
