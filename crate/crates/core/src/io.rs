//! CSV forms of trajectories and control-variate panels.
//!
//! Trajectories are written as `step,x1,...,xd` with values in `{:.16e}`, so
//! that reading a file back reproduces every state bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::panel::{ControlVariatePanel, Trajectory};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = traj.dim();
    let mut header = vec!["step".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(d + 1);
    for (i, s) in traj.states().enumerate() {
        row.clear();
        row.push(i.to_string());
        row.extend(s.iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`]. The header must be
/// exactly `step,x1,...,xd` and steps must count up from zero.
pub fn read_trajectory<R: Read>(input: R, sampler_id: &str, seed: u64, burn_in: usize) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let d = header.len().saturating_sub(1);
    let valid = d >= 1
        && &header[0] == "step"
        && header
            .iter()
            .skip(1)
            .enumerate()
            .all(|(j, h)| h == format!("x{}", j + 1));
    if !valid {
        return Err(Error::Invalid(format!(
            "trajectory header must be step,x1,...,xd; got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Dimension {
                expected: d + 1,
                got: rec.len(),
            });
        }
        let step: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("bad step '{}' on row {i}", &rec[0])))?;
        if step != i {
            return Err(Error::Invalid(format!("expected step {i}, found {step}")));
        }
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad value '{field}' on row {i}")))?;
            data.push(v);
        }
    }
    Trajectory::from_rows(data, d, sampler_id, seed, burn_in)
}

/// Writes `f,g1..gk,pg1..pgk,u1..uk` rows.
pub fn write_panel<W: Write>(panel: &ControlVariatePanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = panel.k();
    let mut header = vec!["f".to_string()];
    for prefix in ["g", "pg", "u"] {
        header.extend((1..=k).map(|j| format!("{prefix}{j}")));
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(3 * k + 1);
    for t in 0..panel.rows() {
        row.clear();
        row.push(fmt(panel.f()[t]));
        for vals in [panel.g_row(t), panel.pg_row(t), panel.u_row(t)] {
            row.extend(vals.iter().map(|&v| fmt(v)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a panel written by [`write_panel`]. The `u` columns are optional;
/// when present they must equal `g - pg`.
pub fn read_panel<R: Read>(input: R) -> Result<ControlVariatePanel> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let bad_header = || {
        Error::Invalid(format!(
            "panel header must be f,g1..gk,pg1..pgk[,u1..uk]; got {}",
            header.join(",")
        ))
    };
    let rest = header.len().saturating_sub(1);
    let with_u = rest > 0 && rest.is_multiple_of(3) && columns_match(&header, rest / 3, true);
    let k = if with_u {
        rest / 3
    } else if rest > 0 && rest.is_multiple_of(2) && columns_match(&header, rest / 2, false) {
        rest / 2
    } else {
        return Err(bad_header());
    };
    let width = header.len();
    let (mut f, mut g, mut pg) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Dimension {
                expected: width,
                got: rec.len(),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for field in rec.iter() {
            vals.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad value '{field}' on row {i}")))?,
            );
        }
        f.push(vals[0]);
        g.extend_from_slice(&vals[1..=k]);
        pg.extend_from_slice(&vals[k + 1..=2 * k]);
        if with_u {
            for j in 0..k {
                let (gv, pv, uv) = (vals[1 + j], vals[1 + k + j], vals[1 + 2 * k + j]);
                if (uv - (gv - pv)).abs() > 1e-9 * (1.0 + gv.abs() + pv.abs()) {
                    return Err(Error::Invalid(format!("u{} on row {i} is not g{0} - pg{0}", j + 1)));
                }
            }
        }
    }
    ControlVariatePanel::new(f, g, pg, k)
}

fn columns_match(header: &[String], k: usize, with_u: bool) -> bool {
    let prefixes: &[&str] = if with_u { &["g", "pg", "u"] } else { &["g", "pg"] };
    let expected =
        std::iter::once("f".to_string()).chain(prefixes.iter().flat_map(|p| (1..=k).map(move |j| format!("{p}{j}"))));
    header.len() == 1 + prefixes.len() * k && header.iter().zip(expected).all(|(h, e)| *h == e)
}
