use std::io::{Read, Write};
use std::path::Path;

use super::ReferenceSample;
use crate::error::{Error, Result};
use crate::hand::HandModel;

/// Recorded reference, linearly interpolated and held at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<ReferenceSample>,
    /// Values pulled back inside joint limits while loading.
    pub clamped: usize,
}

impl Trajectory {
    /// Validates ordering and width, then clamps to the model's limits.
    pub fn new(samples: Vec<ReferenceSample>, model: &HandModel) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::format("trajectory has no samples"));
        }
        let n = model.dofs();
        for (i, s) in samples.iter().enumerate() {
            if s.q_d.len() != n {
                return Err(Error::format(format!(
                    "sample {i} has {} joint values, model has {n}",
                    s.q_d.len()
                )));
            }
            if !s.t.is_finite() || s.q_d.iter().any(|q| !q.is_finite()) {
                return Err(Error::format(format!("sample {i} is not finite")));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(Error::format(format!(
                "time must strictly increase (sample {} at t={} follows t={})",
                i + 1,
                samples[i + 1].t,
                samples[i].t
            )));
        }
        let mut samples = samples;
        let mut clamped = 0;
        for s in &mut samples {
            clamped += model.clamp_to_limits(&mut s.q_d);
        }
        if clamped > 0 {
            log::warn!("trajectory: clamped {clamped} values to joint limits");
        }
        Ok(Self { samples, clamped })
    }

    pub fn samples(&self) -> &[ReferenceSample] {
        &self.samples
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn sample_at(&self, t: f64) -> ReferenceSample {
        let s = &self.samples;
        let first = &s[0];
        let last = &s[s.len() - 1];
        let q_d = if t <= first.t {
            first.q_d.clone()
        } else if t >= last.t {
            last.q_d.clone()
        } else {
            let k = s.partition_point(|x| x.t <= t);
            let (a, b) = (&s[k - 1], &s[k]);
            let w = (t - a.t) / (b.t - a.t);
            a.q_d
                .iter()
                .zip(&b.q_d)
                .map(|(x, y)| x + (y - x) * w)
                .collect()
        };
        ReferenceSample { t, q_d }
    }
}

/// Parses `t,q_0,...,q_{N-1}` rows.
pub fn parse_trajectory(reader: impl Read, model: &HandModel) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(format!("bad header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::format("trajectory file is empty"));
    }
    let n = model.dofs();
    if headers.len() != n + 1 {
        return Err(Error::format(format!(
            "header has {} columns, expected t plus {n} joints",
            headers.len()
        )));
    }
    if headers[0].trim() != "t" {
        return Err(Error::format("first column must be t"));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h.trim() != format!("q_{i}") {
            return Err(Error::format(format!(
                "column {} must be q_{i}, got {h}",
                i + 1
            )));
        }
    }
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(format!("row {}: {e}", row + 1)))?;
        let values = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::format(format!("row {}: {e}", row + 1)))?;
        samples.push(ReferenceSample {
            t: values[0],
            q_d: values[1..].to_vec(),
        });
    }
    Trajectory::new(samples, model)
}

/// Reads a trajectory file.
pub fn load_trajectory(path: impl AsRef<Path>, model: &HandModel) -> Result<Trajectory> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(std::io::BufReader::new(file), model).map_err(|e| e.at(path))
}

/// Writes samples with the standard header. Floats use shortest round-trip form.
pub fn write_trajectory(writer: impl Write, samples: &[ReferenceSample]) -> Result<()> {
    let n = samples.first().map_or(0, |s| s.q_d.len());
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::format(format!("write failed: {e}"));
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("q_{i}")));
    w.write_record(&header).map_err(to_err)?;
    for s in samples {
        let mut row = vec![s.t.to_string()];
        row.extend(s.q_d.iter().map(|q| q.to_string()));
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::format(format!("write failed: {e}")))
}

pub fn save_trajectory(path: impl AsRef<Path>, samples: &[ReferenceSample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory(std::io::BufWriter::new(file), samples)
}
