//! Cohort file formats.
//!
//! Motion (CSV): a header line `V,T,n_subjects`, then for each subject one
//! line with the subject id followed by `V*T` lines `v,t,x,y,z` with
//! 1-based vertex and frame indices in canonical order (vertex outer, frame
//! inner). UTF-8, `.` decimal separator; floats are written in shortest
//! round-trip form.
//!
//! Motion (binary): 16-byte magic `MOTIONSURV-MOT1\0`, little-endian u64
//! dims (V, T, n_subjects), then per subject a u64 id length, the UTF-8 id
//! bytes, and `V*T*3` little-endian f64 coordinates in the same canonical
//! order (vertex outer, frame middle, coordinate inner).
//!
//! Survival (CSV): header `subject_id,time_days,event` with event in {0,1}.
//!
//! Covariates (CSV): header `subject_id,<name>...`, one row per subject.
//!
//! Subject ids may not be empty or contain commas, quotes or control
//! characters, which keeps the CSV grammar trivial.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::motion::{MotionSample, VertexTrajectory};
use crate::survival::SurvivalRecord;

const MOTION_BINARY_MAGIC: &[u8; 16] = b"MOTIONSURV-MOT1\0";

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn validate_subject_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::InvalidInput("subject id must not be empty".into()));
    }
    if id.chars().any(|c| c == ',' || c == '"' || c.is_control()) {
        return Err(Error::InvalidInput(format!(
            "subject id {id:?} contains a comma, quote or control character"
        )));
    }
    Ok(())
}

fn check_cohort(samples: &[MotionSample]) -> Result<(usize, usize)> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot write an empty cohort".into()));
    }
    let v = samples[0].vertex_count();
    let t = samples[0].frame_count();
    for sample in samples {
        validate_subject_id(&sample.subject_id)?;
        if sample.vertex_count() != v || sample.frame_count() != t {
            return Err(Error::InvalidInput(format!(
                "subject {} has mesh {}x{}, expected {v}x{t}",
                sample.subject_id,
                sample.vertex_count(),
                sample.frame_count()
            )));
        }
    }
    Ok((v, t))
}

/// Write a cohort's motion to the CSV container.
pub fn write_motion_csv(path: &Path, samples: &[MotionSample]) -> Result<()> {
    let (v_count, t_count) = check_cohort(samples)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{v_count},{t_count},{}", samples.len())?;
    for sample in samples {
        writeln!(w, "{}", sample.subject_id)?;
        for (v, trajectory) in sample.trajectories.iter().enumerate() {
            for (t, frame) in trajectory.frames.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", v + 1, t + 1, frame[0], frame[1], frame[2])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a motion CSV container.
pub fn read_motion_csv(path: &Path) -> Result<Vec<MotionSample>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 3 {
        return Err(parse_error(path, 1, "header must be `V,T,n_subjects`"));
    }
    let parse_dim = |s: &str, what: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| parse_error(path, 1, format!("bad {what}: {s:?}")))
    };
    let v_count = parse_dim(dims[0], "vertex count")?;
    let t_count = parse_dim(dims[1], "frame count")?;
    let n_subjects = parse_dim(dims[2], "subject count")?;
    if v_count == 0 || t_count < 2 {
        return Err(parse_error(path, 1, format!("invalid dims V={v_count}, T={t_count}")));
    }

    let mut samples = Vec::with_capacity(n_subjects);
    for _ in 0..n_subjects {
        let (id_line_no, id_line) = lines
            .next()
            .ok_or_else(|| parse_error(path, 0, "unexpected end of file before subject id"))?;
        let subject_id = id_line.trim().to_string();
        validate_subject_id(&subject_id)?;
        let mut trajectories = Vec::with_capacity(v_count);
        for v in 0..v_count {
            let mut frames = Vec::with_capacity(t_count);
            for t in 0..t_count {
                let (line_no, line) = lines.next().ok_or_else(|| {
                    parse_error(path, id_line_no + 1, "unexpected end of file in coordinate block")
                })?;
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 5 {
                    return Err(parse_error(path, line_no + 1, "expected `v,t,x,y,z`"));
                }
                let v_ix: usize = fields[0]
                    .trim()
                    .parse()
                    .map_err(|_| parse_error(path, line_no + 1, "bad vertex index"))?;
                let t_ix: usize = fields[1]
                    .trim()
                    .parse()
                    .map_err(|_| parse_error(path, line_no + 1, "bad frame index"))?;
                if v_ix != v + 1 || t_ix != t + 1 {
                    return Err(parse_error(
                        path,
                        line_no + 1,
                        format!("expected vertex {} frame {}, found vertex {v_ix} frame {t_ix}", v + 1, t + 1),
                    ));
                }
                let mut coord = [0.0; 3];
                for (c, field) in fields[2..].iter().enumerate() {
                    coord[c] = field.trim().parse::<f64>().map_err(|_| {
                        parse_error(path, line_no + 1, format!("bad coordinate {field:?}"))
                    })?;
                }
                frames.push(coord);
            }
            trajectories.push(VertexTrajectory::new(frames)?);
        }
        samples.push(MotionSample::new(subject_id, trajectories)?);
    }
    if lines.next().is_some() {
        return Err(parse_error(path, 0, "trailing data after the last subject"));
    }
    Ok(samples)
}

/// Write a cohort's motion to the compact binary container.
pub fn write_motion_binary(path: &Path, samples: &[MotionSample]) -> Result<()> {
    let (v_count, t_count) = check_cohort(samples)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MOTION_BINARY_MAGIC)?;
    for dim in [v_count as u64, t_count as u64, samples.len() as u64] {
        w.write_all(&dim.to_le_bytes())?;
    }
    for sample in samples {
        let id = sample.subject_id.as_bytes();
        w.write_all(&(id.len() as u64).to_le_bytes())?;
        w.write_all(id)?;
        for trajectory in &sample.trajectories {
            for frame in &trajectory.frames {
                for coord in frame {
                    w.write_all(&coord.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read the binary motion container.
pub fn read_motion_binary(path: &Path) -> Result<Vec<MotionSample>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 40 || &bytes[..16] != MOTION_BINARY_MAGIC {
        return Err(Error::InvalidInput(format!(
            "{} is not a binary motion container",
            path.display()
        )));
    }
    let mut offset = 16;
    let mut read_u64 = |offset: &mut usize| -> Result<u64> {
        if bytes.len() < *offset + 8 {
            return Err(Error::InvalidInput("truncated binary motion container".into()));
        }
        let value = u64::from_le_bytes(bytes[*offset..*offset + 8].try_into().unwrap());
        *offset += 8;
        Ok(value)
    };
    let v_count = read_u64(&mut offset)? as usize;
    let t_count = read_u64(&mut offset)? as usize;
    let n_subjects = read_u64(&mut offset)? as usize;
    if v_count == 0 || t_count < 2 {
        return Err(Error::InvalidInput(format!("invalid dims V={v_count}, T={t_count}")));
    }

    let mut samples = Vec::with_capacity(n_subjects);
    for _ in 0..n_subjects {
        let id_len = read_u64(&mut offset)? as usize;
        if bytes.len() < offset + id_len {
            return Err(Error::InvalidInput("truncated subject id".into()));
        }
        let subject_id = std::str::from_utf8(&bytes[offset..offset + id_len])
            .map_err(|_| Error::InvalidInput("subject id is not UTF-8".into()))?
            .to_string();
        validate_subject_id(&subject_id)?;
        offset += id_len;

        let block = v_count * t_count * 3 * 8;
        if bytes.len() < offset + block {
            return Err(Error::InvalidInput(format!(
                "truncated coordinate block for subject {subject_id}"
            )));
        }
        let mut trajectories = Vec::with_capacity(v_count);
        for _ in 0..v_count {
            let mut frames = Vec::with_capacity(t_count);
            for _ in 0..t_count {
                let mut coord = [0.0; 3];
                for slot in &mut coord {
                    *slot = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
                    offset += 8;
                }
                frames.push(coord);
            }
            trajectories.push(VertexTrajectory::new(frames)?);
        }
        samples.push(MotionSample::new(subject_id, trajectories)?);
    }
    if offset != bytes.len() {
        return Err(Error::InvalidInput("trailing bytes after the last subject".into()));
    }
    Ok(samples)
}

/// Read a motion file, sniffing the container by its magic bytes.
pub fn read_motion_auto(path: &Path) -> Result<Vec<MotionSample>> {
    let mut head = [0u8; 16];
    {
        use std::io::Read;
        let mut f = fs::File::open(path)?;
        let n = f.read(&mut head)?;
        if n < 16 {
            return Err(Error::InvalidInput(format!("{} is too short", path.display())));
        }
    }
    if &head == MOTION_BINARY_MAGIC {
        read_motion_binary(path)
    } else {
        read_motion_csv(path)
    }
}

/// Write survival outcomes as `subject_id,time_days,event` CSV.
pub fn write_survival_csv(path: &Path, outcomes: &[SurvivalRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "subject_id,time_days,event")?;
    for outcome in outcomes {
        validate_subject_id(&outcome.subject_id)?;
        writeln!(w, "{},{},{}", outcome.subject_id, outcome.time, outcome.event as u8)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a survival CSV.
pub fn read_survival_csv(path: &Path) -> Result<Vec<SurvivalRecord>> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (ix, line) in text.lines().enumerate() {
        if ix == 0 {
            if line.trim() != "subject_id,time_days,event" {
                return Err(parse_error(path, 1, "header must be `subject_id,time_days,event`"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_error(path, ix + 1, "expected 3 fields"));
        }
        let time: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, ix + 1, format!("bad time {:?}", fields[1])))?;
        let event = match fields[2].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_error(path, ix + 1, format!("event must be 0 or 1, got {other:?}")))
            }
        };
        let record = SurvivalRecord::new(fields[0].trim(), time, event)
            .map_err(|e| parse_error(path, ix + 1, e.to_string()))?;
        validate_subject_id(&record.subject_id)?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(parse_error(path, 1, "no records"));
    }
    Ok(records)
}

/// Write per-subject covariates as CSV with named columns.
pub fn write_covariates_csv(
    path: &Path,
    subject_ids: &[String],
    names: &[String],
    values: &Array2<f64>,
) -> Result<()> {
    if subject_ids.len() != values.nrows() || names.len() != values.ncols() {
        return Err(Error::InvalidInput("covariate table dimensions disagree".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "subject_id")?;
    for name in names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (id, row) in subject_ids.iter().zip(values.rows()) {
        validate_subject_id(id)?;
        write!(w, "{id}")?;
        for value in row {
            write!(w, ",{value}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a covariates CSV: (subject ids, column names, value matrix).
pub fn read_covariates_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 || columns[0].trim() != "subject_id" {
        return Err(parse_error(path, 1, "header must be `subject_id,<name>...`"));
    }
    let names: Vec<String> = columns[1..].iter().map(|c| c.trim().to_string()).collect();
    let mut ids = Vec::new();
    let mut cells = Vec::new();
    for (ix, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(parse_error(path, ix + 1, format!("expected {} fields", names.len() + 1)));
        }
        ids.push(fields[0].trim().to_string());
        for field in &fields[1..] {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, ix + 1, format!("bad value {field:?}")))?;
            cells.push(value);
        }
    }
    if ids.is_empty() {
        return Err(parse_error(path, 1, "no records"));
    }
    let matrix = Array2::from_shape_vec((ids.len(), names.len()), cells)
        .expect("dimensions checked per line");
    Ok((ids, names, matrix))
}

/// Reorder `outcomes` to match the subject order of `samples`, requiring a
/// one-to-one id correspondence.
pub fn align_outcomes(
    samples: &[MotionSample],
    outcomes: &[SurvivalRecord],
) -> Result<Vec<SurvivalRecord>> {
    use std::collections::BTreeMap;
    let mut by_id: BTreeMap<&str, &SurvivalRecord> = BTreeMap::new();
    for outcome in outcomes {
        if by_id.insert(outcome.subject_id.as_str(), outcome).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate subject id {:?} in survival data",
                outcome.subject_id
            )));
        }
    }
    let mut aligned = Vec::with_capacity(samples.len());
    for sample in samples {
        let outcome = by_id.remove(sample.subject_id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "subject {:?} has motion data but no survival record",
                sample.subject_id
            ))
        })?;
        aligned.push(outcome.clone());
    }
    Ok(aligned)
}
