//! Per-step trace records and their CSV form.
//!
//! Columns, SI units (m, m/s, m/s², s, rad):
//!
//! | column | meaning |
//! |---|---|
//! | `time` | simulation time |
//! | `replan` | 1 on steps where a new plan was computed |
//! | `status` | status of the plan being executed |
//! | `iterations`, `segments` | QP iterations and segment count of that plan |
//! | `x y vx vy ax ay` | drone state |
//! | `obj{i}_x obj{i}_y` | true position of moving object `i` |
//! | `obj{i}_cx obj{i}_cy obj{i}_r` | its predicted set at this time |
//! | `target{j}_dist` | drone to target `j` distance |
//! | `clearance` | min over obstacles of `‖c − o‖ − r_o − r_c` |
//! | `visibility` | min over targets and obstacles of the visibility score |
//! | `fov_angle` | angle the two targets subtend at the drone (dual only) |
//!
//! `clearance` and `visibility` are `inf` when there is nothing to occlude.

use std::io::{Read, Write};

use nalgebra::Vector2;

use super::{Result, SimError};
use crate::planner::PlanStatus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSample {
    pub position: Vector2<f64>,
    pub center: Vector2<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub replan: bool,
    pub status: PlanStatus,
    pub iterations: usize,
    pub segments: usize,
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub acceleration: Vector2<f64>,
    pub objects: Vec<ObjectSample>,
    pub target_distance: Vec<f64>,
    pub clearance: f64,
    pub visibility: f64,
    pub fov_angle: Option<f64>,
}

/// Wall-clock cost of one replan; kept apart from the trace so traces
/// stay byte-identical across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRecord {
    pub time: f64,
    pub solve_ms: f64,
    pub qp_ms: f64,
    pub prediction_ms: f64,
}

pub fn header(objects: usize, targets: usize, dual: bool) -> Vec<String> {
    let mut h: Vec<String> = ["time", "replan", "status", "iterations", "segments", "x", "y", "vx", "vy", "ax", "ay"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..objects {
        for f in ["x", "y", "cx", "cy", "r"] {
            h.push(format!("obj{i}_{f}"));
        }
    }
    for j in 0..targets {
        h.push(format!("target{j}_dist"));
    }
    h.push("clearance".into());
    h.push("visibility".into());
    if dual {
        h.push("fov_angle".into());
    }
    h
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord], objects: usize, targets: usize, dual: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(objects, targets, dual))?;
    for r in records {
        let mut row = vec![
            r.time.to_string(),
            u8::from(r.replan).to_string(),
            r.status.as_str().to_string(),
            r.iterations.to_string(),
            r.segments.to_string(),
        ];
        for v in [r.position, r.velocity, r.acceleration] {
            row.push(v.x.to_string());
            row.push(v.y.to_string());
        }
        for o in &r.objects {
            for v in [o.position.x, o.position.y, o.center.x, o.center.y, o.radius] {
                row.push(v.to_string());
            }
        }
        row.extend(r.target_distance.iter().map(f64::to_string));
        row.push(r.clearance.to_string());
        row.push(r.visibility.to_string());
        if dual {
            row.push(r.fov_angle.unwrap_or(f64::NAN).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| SimError::Trace(e.to_string()))?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R, objects: usize, targets: usize, dual: bool) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let expected = header(objects, targets, dual);
    let got: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(SimError::Trace(format!("unexpected header: {}", got.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| SimError::Trace(format!("row {}: bad value in column {}", line + 1, expected[col]));
        let num = |col: usize| -> Result<f64> { rec[col].parse::<f64>().map_err(|_| bad(col)) };
        let int = |col: usize| -> Result<usize> { rec[col].parse::<usize>().map_err(|_| bad(col)) };
        let replan = match &rec[1] {
            "0" => false,
            "1" => true,
            _ => return Err(bad(1)),
        };
        let status = PlanStatus::parse(&rec[2]).ok_or_else(|| bad(2))?;
        let vec2 = |col: usize| -> Result<Vector2<f64>> { Ok(Vector2::new(num(col)?, num(col + 1)?)) };
        let mut col = 11;
        let mut objs = Vec::with_capacity(objects);
        for _ in 0..objects {
            objs.push(ObjectSample { position: vec2(col)?, center: vec2(col + 2)?, radius: num(col + 4)? });
            col += 5;
        }
        let target_distance = (0..targets).map(|j| num(col + j)).collect::<Result<Vec<_>>>()?;
        col += targets;
        out.push(TraceRecord {
            time: num(0)?,
            replan,
            status,
            iterations: int(3)?,
            segments: int(4)?,
            position: vec2(5)?,
            velocity: vec2(7)?,
            acceleration: vec2(9)?,
            objects: objs,
            target_distance,
            clearance: num(col)?,
            visibility: num(col + 1)?,
            fov_angle: if dual { Some(num(col + 2)?) } else { None },
        });
    }
    Ok(out)
}

pub fn write_timing<W: Write>(out: W, timing: &[TimingRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "solve_ms", "qp_ms", "prediction_ms"])?;
    for t in timing {
        w.write_record([t.time, t.solve_ms, t.qp_ms, t.prediction_ms].map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| SimError::Trace(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let rec = TraceRecord {
            time: 0.105,
            replan: true,
            status: PlanStatus::Relaxed,
            iterations: 17,
            segments: 2,
            position: Vector2::new(0.1 + 0.2, -1.0 / 3.0),
            velocity: Vector2::new(1e-300, 2.5),
            acceleration: Vector2::new(-0.0, 4.0),
            objects: vec![ObjectSample {
                position: Vector2::new(1.0, 2.0),
                center: Vector2::new(1.1, 2.2),
                radius: std::f64::consts::PI,
            }],
            target_distance: vec![3.999999999],
            clearance: f64::INFINITY,
            visibility: 0.75,
            fov_angle: Some(1.2),
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, std::slice::from_ref(&rec), 1, 1, true).unwrap();
        let back = read_trace(buf.as_slice(), 1, 1, true).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "time,replan\n0,1\n";
        assert!(read_trace(text.as_bytes(), 0, 1, false).is_err());
    }
}
