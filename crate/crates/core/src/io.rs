//! CSV persistence of traces, plot series and field snapshots, and the run
//! manifest. Floating-point values are written with 17 significant digits,
//! so every number parses back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionTrace, TraceRow};
use crate::plate::{assemble_strain, Alpha, Grid, PlateState, NODE_DOFS};
use crate::tensor::DeviatoricTensor;

pub const TRACE_HEADER: &str = "step,t,elastic,hardening,dissipation_cum,work_cum,balance_residual,stability_margin,el_residual,inner_iters";
pub const PLOT_HEADER: &str = "t,elastic,hardening,dissipation_cum,work_cum,balance_residual";
pub const POINTS_HEADER: &str = "cell_i,cell_j,layer,x1,x2,x3,p11,p22,p12,p13,p23,E11,E22,E12";
pub const NODES_HEADER: &str = "node_i,node_j,x1,x2,u1,u2,v,dv1,dv2,dv12";

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn format_err(name: &str, reason: impl Into<String>) -> Error {
    Error::Format {
        path: name.to_string(),
        reason: reason.into(),
    }
}

/// Data rows of a CSV text after checking its header.
fn csv_rows<'a>(text: &'a str, header: &str, name: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((_, h)) => return Err(format_err(name, format!("unexpected header `{}`", h.trim()))),
        None => return Err(format_err(name, "missing header")),
    }
    let width = header.split(',').count();
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split(',').map(str::trim).collect();
            if cols.len() != width {
                return Err(format_err(
                    name,
                    format!("line {}: expected {width} columns, got {}", i + 1, cols.len()),
                ));
            }
            Ok((i + 1, cols))
        })
        .collect()
}

fn num(cols: &[&str], k: usize, line: usize, name: &str) -> Result<f64> {
    cols[k]
        .parse()
        .map_err(|_| format_err(name, format!("line {line}: bad number `{}`", cols[k])))
}

fn int(cols: &[&str], k: usize, line: usize, name: &str) -> Result<usize> {
    cols[k]
        .parse()
        .map_err(|_| format_err(name, format!("line {line}: bad integer `{}`", cols[k])))
}

pub fn trace_csv(trace: &EvolutionTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.t),
            fmt_f64(r.elastic),
            fmt_f64(r.hardening),
            fmt_f64(r.dissipation_cum),
            fmt_f64(r.work_cum),
            fmt_f64(r.balance_residual),
            fmt_f64(r.stability_margin),
            fmt_f64(r.el_residual),
            r.inner_iters
        );
    }
    s
}

pub fn parse_trace_csv(text: &str, name: &str) -> Result<EvolutionTrace> {
    let rows = csv_rows(text, TRACE_HEADER, name)?
        .into_iter()
        .map(|(line, c)| {
            Ok(TraceRow {
                step: int(&c, 0, line, name)?,
                t: num(&c, 1, line, name)?,
                elastic: num(&c, 2, line, name)?,
                hardening: num(&c, 3, line, name)?,
                dissipation_cum: num(&c, 4, line, name)?,
                work_cum: num(&c, 5, line, name)?,
                balance_residual: num(&c, 6, line, name)?,
                stability_margin: num(&c, 7, line, name)?,
                el_residual: num(&c, 8, line, name)?,
                inner_iters: int(&c, 9, line, name)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionTrace { rows })
}

/// Energy series for external plotting, one row per knot.
pub fn emit_plotdata(trace: &EvolutionTrace) -> String {
    let mut s = String::from(PLOT_HEADER);
    s.push('\n');
    for r in &trace.rows {
        let vals = [r.t, r.elastic, r.hardening, r.dissipation_cum, r.work_cum, r.balance_residual];
        let cols: Vec<String> = vals.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(s, "{}", cols.join(","));
    }
    s
}

pub fn parse_plotdata(text: &str, name: &str) -> Result<Vec<[f64; 6]>> {
    csv_rows(text, PLOT_HEADER, name)?
        .into_iter()
        .map(|(line, c)| {
            let mut row = [0.0; 6];
            for (k, x) in row.iter_mut().enumerate() {
                *x = num(&c, k, line, name)?;
            }
            Ok(row)
        })
        .collect()
}

/// One row per quadrature point with plastic strain and driving strain.
pub fn points_csv(grid: &Grid, state: &PlateState, alpha: Alpha) -> String {
    let strain = assemble_strain(grid, state, alpha);
    let mut s = String::from(POINTS_HEADER);
    s.push('\n');
    for c in 0..grid.n_cells() {
        let (ci, cj) = grid.cell_ij(c);
        for g in 0..grid.points_per_cell() {
            let (x1, x2) = grid.inplane_position(c, g);
            for (l, &x3) in grid.layers().iter().enumerate() {
                let idx = grid.point_index(c, g, l);
                let p = &state.p[idx];
                let e = &strain[idx];
                let vals = [x1, x2, x3, p.p11, p.p22, p.p12, p.p13, p.p23, e.xx, e.yy, e.xy];
                let cols: Vec<String> = vals.iter().map(|&x| fmt_f64(x)).collect();
                let _ = writeln!(s, "{ci},{cj},{l},{}", cols.join(","));
            }
        }
    }
    s
}

/// Nodal displacement and deflection DOFs.
pub fn nodes_csv(grid: &Grid, state: &PlateState) -> String {
    let mut s = String::from(NODES_HEADER);
    s.push('\n');
    for n in 0..grid.n_nodes() {
        let (i, j) = grid.node_ij(n);
        let (x1, x2) = grid.node_pos(n);
        let mut cols = vec![fmt_f64(x1), fmt_f64(x2)];
        cols.extend(state.dofs[NODE_DOFS * n..NODE_DOFS * (n + 1)].iter().map(|&x| fmt_f64(x)));
        let _ = writeln!(s, "{i},{j},{}", cols.join(","));
    }
    s
}

/// Rebuilds a state from the two snapshot files written for it.
pub fn read_state(grid: &Grid, nodes: &str, points: &str, name: &str) -> Result<PlateState> {
    let mut state = PlateState::zeros(grid);
    let node_rows = csv_rows(nodes, NODES_HEADER, name)?;
    if node_rows.len() != grid.n_nodes() {
        return Err(format_err(
            name,
            format!("expected {} nodes, got {}", grid.n_nodes(), node_rows.len()),
        ));
    }
    for (line, c) in node_rows {
        let (i, j) = (int(&c, 0, line, name)?, int(&c, 1, line, name)?);
        if i > grid.nx || j > grid.ny {
            return Err(format_err(name, format!("line {line}: node ({i}, {j}) outside the grid")));
        }
        let n = grid.node(i, j);
        for k in 0..NODE_DOFS {
            state.dofs[NODE_DOFS * n + k] = num(&c, 4 + k, line, name)?;
        }
    }
    let point_rows = csv_rows(points, POINTS_HEADER, name)?;
    if point_rows.len() != grid.n_points() {
        return Err(format_err(
            name,
            format!("expected {} points, got {}", grid.n_points(), point_rows.len()),
        ));
    }
    // rows follow the point ordering of `points_csv`
    for (idx, (line, c)) in point_rows.into_iter().enumerate() {
        let mut v = [0.0; 5];
        for (k, x) in v.iter_mut().enumerate() {
            *x = num(&c, 6 + k, line, name)?;
        }
        state.p[idx] = DeviatoricTensor::new(v[0], v[1], v[2], v[3], v[4]);
    }
    Ok(state)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of a run: configuration, timings and output digests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub config: String,
    /// Wall-clock seconds per phase.
    pub phases: Vec<(String, f64)>,
    /// File name and SHA-256 digest of its content.
    pub files: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, config: &str) -> Self {
        RunManifest {
            tool: format!("thinplate {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config: config.to_string(),
            ..RunManifest::default()
        }
    }

    pub fn record_file(&mut self, name: &str, content: &[u8]) {
        self.files.push((name.to_string(), sha256_hex(content)));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = {}", self.tool);
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "\n[phases]");
        for (name, secs) in &self.phases {
            let _ = writeln!(s, "{name} = {secs:.6} s");
        }
        let _ = writeln!(s, "\n[files]");
        for (name, digest) in &self.files {
            let _ = writeln!(s, "{digest}  {name}");
        }
        let _ = writeln!(s, "\n[config]");
        s.push_str(&self.config);
        s
    }

    /// Reads back the text written by [`RunManifest::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: "manifest".into(),
            reason: reason.to_string(),
        };
        let (head, config) = text.split_once("\n[config]\n").ok_or_else(|| bad("missing [config]"))?;
        let mut m = RunManifest {
            config: config.to_string(),
            ..RunManifest::default()
        };
        let mut section = "";
        for line in head.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with('[') {
                section = line;
                continue;
            }
            match section {
                "" => match line.split_once(" = ") {
                    Some(("tool", v)) => m.tool = v.to_string(),
                    Some(("command", v)) => m.command = v.to_string(),
                    _ => return Err(bad(&format!("unexpected line '{line}'"))),
                },
                "[phases]" => {
                    let (name, secs) = line.split_once(" = ").ok_or_else(|| bad(line))?;
                    let secs = secs.trim_end_matches(" s").parse().map_err(|_| bad(line))?;
                    m.phases.push((name.to_string(), secs));
                }
                "[files]" => {
                    let (digest, name) = line.split_once("  ").ok_or_else(|| bad(line))?;
                    m.files.push((name.to_string(), digest.to_string()));
                }
                _ => return Err(bad(&format!("unknown section {section}"))),
            }
        }
        Ok(m)
    }

    /// Files whose current content no longer matches the recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (name, digest) in &self.files {
            let content = std::fs::read(dir.join(name))?;
            if &sha256_hex(&content) != digest {
                bad.push(name.clone());
            }
        }
        Ok(bad)
    }
}

/// Writes `content` to `dir/name` and records it in the manifest.
pub fn write_output(dir: &Path, name: &str, content: &str, manifest: &mut RunManifest) -> Result<()> {
    std::fs::write(dir.join(name), content)?;
    manifest.record_file(name, content.as_bytes());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plate::EdgeSet;
    use proptest::prelude::*;

    fn row(step: usize, t: f64) -> TraceRow {
        TraceRow {
            step,
            t,
            elastic: 0.1 + t / 3.0,
            hardening: t * t / 7.0,
            dissipation_cum: t.sqrt(),
            work_cum: 1e-300 * t,
            balance_residual: -t / 11.0,
            stability_margin: f64::NAN,
            el_residual: 1e-17,
            inner_iters: 3 * step,
        }
    }

    fn same_bits(a: &EvolutionTrace, b: &EvolutionTrace) -> bool {
        let key = |r: &TraceRow| {
            [r.t, r.elastic, r.hardening, r.dissipation_cum, r.work_cum, r.balance_residual, r.stability_margin, r.el_residual]
                .map(f64::to_bits)
        };
        a.rows.len() == b.rows.len()
            && a.rows.iter().zip(&b.rows).all(|(x, y)| {
                key(x) == key(y) && x.step == y.step && x.inner_iters == y.inner_iters
            })
    }

    #[test]
    fn empty_trace_gives_header_only_files() {
        let t = EvolutionTrace::default();
        assert_eq!(emit_plotdata(&t), format!("{PLOT_HEADER}\n"));
        assert_eq!(trace_csv(&t), format!("{TRACE_HEADER}\n"));
        assert!(parse_plotdata(&emit_plotdata(&t), "p").unwrap().is_empty());
    }

    #[test]
    fn plotdata_has_one_row_per_knot() {
        let t = EvolutionTrace {
            rows: (0..=4).map(|i| row(i, i as f64 / 4.0)).collect(),
        };
        let text = emit_plotdata(&t);
        assert_eq!(text.lines().count(), 6);
        let back = parse_plotdata(&text, "p").unwrap();
        for (r, b) in t.rows.iter().zip(&back) {
            assert_eq!(b[0].to_bits(), r.t.to_bits());
            assert_eq!(b[5].to_bits(), r.balance_residual.to_bits());
        }
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(parse_trace_csv("", "x").is_err());
        assert!(parse_trace_csv("a,b\n", "x").is_err());
        let short = format!("{TRACE_HEADER}\n1,2\n");
        assert!(matches!(parse_trace_csv(&short, "x"), Err(Error::Format { .. })));
    }

    #[test]
    fn snapshots_restore_the_state() {
        let grid = Grid::new(1.0, 2.0, 2, 3, 2, EdgeSet::all()).unwrap();
        let mut s = PlateState::zeros(&grid);
        for (i, d) in s.dofs.iter_mut().enumerate() {
            *d = (i as f64 * 0.37).sin() / 3.0;
        }
        for (i, p) in s.p.iter_mut().enumerate() {
            let x = i as f64;
            *p = DeviatoricTensor::new(x.cos() / 7.0, x.sin(), 1e-9 * x, -x / 3.0, 0.1);
        }
        let nodes = nodes_csv(&grid, &s);
        let points = points_csv(&grid, &s, Alpha::VonKarman);
        assert_eq!(points.lines().count(), grid.n_points() + 1);
        assert_eq!(read_state(&grid, &nodes, &points, "snap").unwrap(), s);
        let other = Grid::new(1.0, 2.0, 3, 3, 2, EdgeSet::all()).unwrap();
        assert!(read_state(&other, &nodes, &points, "snap").is_err());
    }

    #[test]
    fn manifest_digests_are_recomputable() {
        let dir = std::env::temp_dir().join(format!("thinplate-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut m = RunManifest::new("simulate", "[grid]\n");
        write_output(&dir, "a.csv", "x\n1\n", &mut m).unwrap();
        assert!(m.verify(&dir).unwrap().is_empty());
        assert_eq!(m.files[0].1, sha256_hex(b"x\n1\n"));
        std::fs::write(dir.join("a.csv"), "x\n2\n").unwrap();
        assert_eq!(m.verify(&dir).unwrap(), vec!["a.csv".to_string()]);
        m.phases.push(("evolution".into(), 1.5));
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
        assert!(RunManifest::parse("tool = x\n").is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    proptest! {
        #[test]
        fn trace_round_trips_bit_for_bit(ts in proptest::collection::vec(-1e300f64..1e300, 0..20)) {
            let t = EvolutionTrace {
                rows: ts.iter().enumerate().map(|(i, &x)| row(i, x.abs())).collect(),
            };
            let back = parse_trace_csv(&trace_csv(&t), "trace").unwrap();
            prop_assert!(same_bits(&t, &back));
        }

        #[test]
        fn seventeen_digits_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
