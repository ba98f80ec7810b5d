//! File formats: trajectories (JSON, CSV), entropy reports (JSON, plotting CSV) and
//! witness reports (JSON).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyReport, SlopeFit};
use crate::error::{FpeError, Result};
use crate::integrate::{BranchDecision, Choice, SampledTrajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub choice: String,
}

/// On-disk trajectory: `{ system, W, dt, points, decisions }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub system: String,
    #[serde(rename = "W")]
    pub window: f64,
    pub dt: f64,
    pub points: Vec<[f64; 2]>,
    pub decisions: Vec<DecisionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_id: Option<usize>,
}

/// Inverse of [`Choice::label`]; slide exits take their time from the decision.
pub fn parse_choice(label: &str, t: f64) -> Result<Choice> {
    Ok(match label {
        "FollowX" => Choice::FollowX,
        "FollowY" => Choice::FollowY,
        "Slide" => Choice::Slide,
        "ExitSlideToX" => Choice::ExitSlideToX(t),
        "ExitSlideToY" => Choice::ExitSlideToY(t),
        "StayFixed" => Choice::StayFixed,
        other => match other.strip_prefix("Arc").and_then(|j| j.parse().ok()) {
            Some(j) => Choice::Arc(j),
            None => return Err(FpeError::Io(format!("unknown choice `{other}`"))),
        },
    })
}

impl From<&SampledTrajectory> for TrajectoryRecord {
    fn from(t: &SampledTrajectory) -> Self {
        Self {
            system: t.system.clone(),
            window: t.window,
            dt: t.dt,
            points: t.points.clone(),
            decisions: t
                .decisions
                .iter()
                .map(|d| DecisionRecord { t: d.time, x: d.at[0], y: d.at[1], choice: d.choice.label() })
                .collect(),
            branch_id: Some(t.branch_id),
        }
    }
}

impl TrajectoryRecord {
    pub fn into_trajectory(self) -> Result<SampledTrajectory> {
        let n = self.points.len();
        if n == 0 || n % 2 == 0 || !(self.dt > 0.0) {
            return Err(FpeError::Io("trajectory needs an odd number of samples and dt > 0".into()));
        }
        let decisions = self
            .decisions
            .iter()
            .map(|d| Ok(BranchDecision { time: d.t, at: [d.x, d.y], choice: parse_choice(&d.choice, d.t)? }))
            .collect::<Result<_>>()?;
        Ok(SampledTrajectory {
            system: self.system,
            window: self.window,
            dt: self.dt,
            points: self.points,
            decisions,
            branch_id: self.branch_id.unwrap_or(0),
        })
    }
}

/// A JSON array of trajectory records.
pub fn write_trajectories_json<W: Write>(out: W, trajs: &[SampledTrajectory]) -> Result<()> {
    let recs: Vec<TrajectoryRecord> = trajs.iter().map(TrajectoryRecord::from).collect();
    serde_json::to_writer(out, &recs)?;
    Ok(())
}

/// Accepts an array of records or a single record.
pub fn read_trajectories_json<R: Read>(input: R) -> Result<Vec<SampledTrajectory>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<TrajectoryRecord>),
        One(TrajectoryRecord),
    }
    let recs = match serde_json::from_reader(input)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![r],
    };
    recs.into_iter().map(TrajectoryRecord::into_trajectory).collect()
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    x: f64,
    y: f64,
    branch_id: usize,
}

/// One row per sample: `t,x,y,branch_id`.
pub fn write_trajectories_csv<W: Write>(out: W, trajs: &[SampledTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for tr in trajs {
        for (i, p) in tr.points.iter().enumerate() {
            w.serialize(CsvRow { t: tr.time_of(i), x: p[0], y: p[1], branch_id: tr.branch_id })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows grouped by `branch_id`; `W` and `dt` come from the time column.
/// Decisions are not part of the CSV form.
pub fn read_trajectories_csv<R: Read>(input: R, system: &str) -> Result<Vec<SampledTrajectory>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<(usize, Vec<f64>, Vec<[f64; 2]>)> = Vec::new();
    for row in rdr.deserialize() {
        let r: CsvRow = row?;
        match out.last_mut() {
            Some((id, ts, ps)) if *id == r.branch_id => {
                ts.push(r.t);
                ps.push([r.x, r.y]);
            }
            _ => out.push((r.branch_id, vec![r.t], vec![[r.x, r.y]])),
        }
    }
    out.into_iter()
        .map(|(id, ts, points)| {
            let window = -ts[0];
            let dt = if ts.len() > 1 { ((ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64 * 1e12).round() / 1e12 } else { 1.0 };
            if points.len() % 2 == 0 || (ts[ts.len() - 1] - window).abs() > 1e-9 {
                return Err(FpeError::Io(format!("branch {id}: samples do not cover a symmetric window")));
            }
            Ok(SampledTrajectory { system: system.into(), window, dt, points, decisions: vec![], branch_id: id })
        })
        .collect()
}

/// Report JSON: `{ system, eps, n, span, sep, slopes: {span, sep, gap, regimes}, h_estimate, verdict, … }`.
#[derive(Serialize)]
struct ReportJson<'a> {
    system: &'a str,
    eps: &'a [f64],
    n: &'a [usize],
    span: &'a [Vec<usize>],
    sep: &'a [Vec<usize>],
    slopes: SlopesJson,
    h_estimate: f64,
    verdict: &'a str,
    slopes_increasing: bool,
    set_size: usize,
    partial: bool,
    notes: &'a [String],
}

#[derive(Serialize)]
struct SlopesJson {
    span: Vec<f64>,
    sep: Vec<f64>,
    gap: Vec<f64>,
    regimes: Vec<(SlopeFit, SlopeFit)>,
}

pub fn write_report_json<W: Write>(out: W, r: &EntropyReport) -> Result<()> {
    let slopes = SlopesJson {
        span: r.slopes.iter().map(|s| s.span.slope).collect(),
        sep: r.slopes.iter().map(|s| s.sep.slope).collect(),
        gap: r.slopes.iter().map(|s| s.gap).collect(),
        regimes: r.slopes.iter().map(|s| (s.span, s.sep)).collect(),
    };
    let j = ReportJson {
        system: &r.system,
        eps: &r.eps,
        n: &r.n,
        span: &r.span,
        sep: &r.sep,
        slopes,
        h_estimate: r.h_estimate,
        verdict: &r.verdict,
        slopes_increasing: r.slopes_increasing,
        set_size: r.set_size,
        partial: r.partial,
        notes: &r.notes,
    };
    serde_json::to_writer_pretty(out, &j)?;
    Ok(())
}

/// Flat plotting table `eps,n,span,sep`.
pub fn write_report_csv<W: Write>(out: W, r: &EntropyReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "n", "span", "sep"])?;
    for (e, eps) in r.eps.iter().enumerate() {
        for (k, n) in r.n.iter().enumerate() {
            w.write_record([eps.to_string(), n.to_string(), r.span[e][k].to_string(), r.sep[e][k].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psvf::Vec2;

    fn sample() -> SampledTrajectory {
        let mut t = SampledTrajectory::constant("bean", Vec2::new(-0.5, 0.0), 1.0, 0.25);
        t.points[3] = [0.1 / 3.0, 0.7];
        t.points[5] = [0.6, 0.42000000000000004];
        t.decisions = vec![
            BranchDecision { time: 0.0, at: [-0.5, 0.0], choice: Choice::FollowX },
            BranchDecision { time: 0.5, at: [0.25, 0.0], choice: Choice::ExitSlideToY(0.5) },
            BranchDecision { time: 0.75, at: [0.0, 0.0], choice: Choice::Arc(2) },
        ];
        t.branch_id = 7;
        t
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_trajectories_json(&mut buf, std::slice::from_ref(&t)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"W\":1.0") && text.contains("\"choice\":\"ExitSlideToY\""));
        assert_eq!(read_trajectories_json(&buf[..]).unwrap(), vec![t]);
    }

    #[test]
    fn csv_round_trip_keeps_samples() {
        let t = sample();
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, std::slice::from_ref(&t)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,branch_id\n-1.0,-0.5,0.0,7\n"), "{text}");
        let back = read_trajectories_csv(&buf[..], "bean").unwrap();
        assert_eq!(back[0].points, t.points);
        assert_eq!((back[0].window, back[0].dt, back[0].branch_id), (1.0, 0.25, 7));
    }

    #[test]
    fn bad_records_are_rejected() {
        assert!(parse_choice("Jump", 0.0).is_err());
        assert!(read_trajectories_json(&b"{\"system\":\"s\",\"W\":1,\"dt\":0.5,\"points\":[[0,0],[1,1]],\"decisions\":[]}"[..]).is_err());
    }
}
