//! On-disk artifact formats: schedules and trajectories as CSV, targets and
//! grids as JSON.

use std::path::Path;

use lie_ensemble::lie_core::{expm, Algebra, GroupElement};
use lie_ensemble::simulator::EnsembleTrajectory;
use lie_ensemble::spec::{ParamExpr, ParamField, SystemSpec};
use lie_ensemble::synthesis::{euler_compose, Axis, ControlSchedule};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{}: {e}", path.display()))
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Columns t_start, t_end, u_1 … u_m.
pub fn schedule_csv(s: &ControlSchedule) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t_start".to_string(), "t_end".to_string()];
    header.extend((1..=s.channels).map(|k| format!("u_{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, u) in s.controls.iter().enumerate() {
        let mut row = vec![s.breakpoints[i].to_string(), s.breakpoints[i + 1].to_string()];
        row.extend(u.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).map_err(|e| CliError::Io(e.to_string()))
}

pub fn parse_schedule_csv(text: &str) -> Result<ControlSchedule, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::Usage(e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "t_start" || &header[1] != "t_end" {
        return Err(CliError::Usage("schedule CSV must start with t_start,t_end".into()));
    }
    let mut s = ControlSchedule::new(header.len() - 2);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(e.to_string()))?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("schedule row {}: {e}", line + 1)))?;
        if nums.len() != header.len() {
            return Err(CliError::Usage(format!("schedule row {} has {} fields", line + 1, nums.len())));
        }
        if line == 0 {
            s.breakpoints[0] = nums[0];
        } else if nums[0] != *s.breakpoints.last().expect("nonempty") {
            return Err(CliError::Usage(format!("schedule row {} does not start where the previous ended", line + 1)));
        }
        s.push(nums[1] - nums[0], nums[2..].to_vec());
        *s.breakpoints.last_mut().expect("nonempty") = nums[1];
    }
    s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(s)
}

/// Reads a schedule from `.csv` or JSON.
pub fn read_schedule(path: &Path) -> Result<ControlSchedule, CliError> {
    if path.extension().is_some_and(|e| e == "csv") {
        parse_schedule_csv(&read_text(path)?)
    } else {
        let s: ControlSchedule = parse_json(path)?;
        s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }
}

/// Columns grid_index, t, then state entries row-major (re/im pairs for SU(2)).
pub fn trajectory_csv(t: &EnsembleTrajectory) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let first = t.states.first().and_then(|s| s.first());
    let (d, complex) = match first {
        Some(g) => (g.matrix.nrows(), g.group == Algebra::Su2),
        None => (0, false),
    };
    let mut header = vec!["grid_index".to_string(), "t".to_string()];
    for i in 1..=d {
        for j in 1..=d {
            if complex {
                header.push(format!("m_{i}{j}_re"));
                header.push(format!("m_{i}{j}_im"));
            } else {
                header.push(format!("m_{i}{j}"));
            }
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for (p, states) in t.states.iter().enumerate() {
        for (time, g) in t.times.iter().zip(states) {
            let mut row = vec![p.to_string(), time.to_string()];
            for i in 0..d {
                for j in 0..d {
                    let z = g.matrix[(i, j)];
                    row.push(z.re.to_string());
                    if complex {
                        row.push(z.im.to_string());
                    }
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorFile {
    pub axis: Axis,
    pub angle: ParamField,
}

/// Target ensemble state. At most one rotation form may be given; none means
/// the identity rotation.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    /// Constant X-Y-Z Euler angles (SO(3) rotation block).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler: Option<[f64; 3]>,
    /// Product of exp(angle(β)·Ω_axis), left to right.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<FactorFile>>,
    /// Constant rotation block, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<f64>>>,
    /// Constant translation (SE(n)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
    /// One full group matrix per grid point, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad number {x:?}: {e}"))))
                .collect()
        })
        .collect()
}

impl TargetFile {
    pub fn states(&self, spec: &SystemSpec, grid: &[Vec<f64>]) -> Result<Vec<GroupElement>, CliError> {
        let group = spec.algebra;
        let forms = [self.euler.is_some(), self.factors.is_some(), self.rotation.is_some(), self.matrices.is_some()];
        if forms.iter().filter(|&&f| f).count() > 1 {
            return Err(CliError::Usage("target gives more than one rotation form".into()));
        }
        if let Some(ms) = &self.matrices {
            if self.translation.is_some() {
                return Err(CliError::Usage("matrices already carry the translation".into()));
            }
            if ms.len() != grid.len() {
                return Err(CliError::Usage(format!("target has {} matrices for {} grid points", ms.len(), grid.len())));
            }
            if group == Algebra::Su2 {
                return Err(CliError::Usage("SU(2) targets are not supported in files".into()));
            }
            let d = group.matrix_size();
            return ms.iter().map(|m| Ok(GroupElement::from_real(group, &matrix_from_rows(m, d)?))).collect();
        }
        let n = match group {
            Algebra::So(n) | Algebra::Se(n) => n,
            _ if forms.iter().any(|&f| f) || self.translation.is_some() => {
                return Err(CliError::Usage("only the identity target is supported for this group".into()))
            }
            _ => return Ok(vec![GroupElement::identity(group); grid.len()]),
        };
        let labels = spec.labels();
        let mut out = Vec::with_capacity(grid.len());
        for point in grid {
            let rot = if let Some(e) = self.euler {
                if n != 3 {
                    return Err(CliError::Usage("Euler targets need n = 3".into()));
                }
                euler_compose(e)
            } else if let Some(fs) = &self.factors {
                if n != 3 {
                    return Err(CliError::Usage("axis factors need n = 3".into()));
                }
                let mut r = DMatrix::<f64>::identity(3, 3);
                for f in fs {
                    let angle = match &f.angle {
                        ParamField::Number(x) => *x,
                        ParamField::Text(t) => ParamExpr::parse(t, &labels).map_err(|e| CliError::Usage(e.to_string()))?.eval(point),
                    };
                    let g = expm(&f.axis.element().scale(angle)).map_err(CliError::Module)?;
                    r *= g.real_part();
                }
                r
            } else if let Some(rows) = &self.rotation {
                matrix_from_rows(rows, n)?
            } else {
                DMatrix::identity(n, n)
            };
            let g = match group {
                Algebra::Se(_) => {
                    let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
                    m.view_mut((0, 0), (n, n)).copy_from(&rot);
                    if let Some(x) = &self.translation {
                        if x.len() != n {
                            return Err(CliError::Usage(format!("translation needs {n} entries")));
                        }
                        for (k, v) in x.iter().enumerate() {
                            m[(k, n)] = *v;
                        }
                    }
                    GroupElement::from_real(group, &m)
                }
                _ => {
                    if self.translation.is_some() {
                        return Err(CliError::Usage("translation targets need an SE(n) spec".into()));
                    }
                    GroupElement::from_real(group, &rot)
                }
            };
            if g.invariant_residual() > 1e-9 {
                return Err(CliError::Usage("target is not a group element".into()));
            }
            out.push(g);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_csv_round_trip() {
        let mut s = ControlSchedule::new(2);
        s.push(1.0, vec![0.1, -2.5]);
        s.push(0.25, vec![0.0, 1.0 / 3.0]);
        let text = schedule_csv(&s).unwrap();
        assert!(text.starts_with("t_start,t_end,u_1,u_2\n"));
        assert_eq!(parse_schedule_csv(&text).unwrap(), s);
    }

    #[test]
    fn rows_parse() {
        assert_eq!(parse_rows("1,0;0,1").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_rows("1,x").is_err());
    }
}
