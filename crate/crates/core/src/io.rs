//! CSV, JSON and whitespace-separated `.dat` exporters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::elliptic::PicardRecord;
use crate::error::Result;
use crate::grid::{DensityField, ScalarField};
use crate::optimizer::HistoryEntry;
use crate::radial::{RadialSolution, StabilityReport};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?
        .flush()?;
    Ok(())
}

/// Nodal field: a `# n=..,L=..,h=..` line, then `i,j,x,y,value` row-major.
pub fn write_field_csv<W: Write>(mut out: W, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    writeln!(out, "# n={},L={},h={}", grid.n(), grid.half_width(), grid.h())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "x", "y", "value"])?;
    let m = grid.interior_per_side();
    for j in 1..=m {
        for i in 1..=m {
            let (x, y) = grid.node_xy(i, j);
            w.serialize((i, j, x, y, field.values()[grid.node_index(i, j)]))?;
        }
    }
    finish(w)
}

/// Cell field: same layout with cell indices and centers.
pub fn write_density_csv<W: Write>(mut out: W, density: &DensityField) -> Result<()> {
    let grid = density.grid();
    writeln!(out, "# n={},L={},h={}", grid.n(), grid.half_width(), grid.h())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "x", "y", "value"])?;
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let (x, y) = grid.cell_center(i, j);
            w.serialize((i, j, x, y, density.values()[grid.cell_index(i, j)]))?;
        }
    }
    finish(w)
}

pub fn write_history_csv<W: Write>(out: W, history: &[HistoryEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "M",
        "iteration",
        "value",
        "mass",
        "binariness",
        "step",
        "increment",
        "armijo_slack",
    ])?;
    for h in history {
        w.serialize((
            h.penalty,
            h.iteration,
            h.value,
            h.mass,
            h.binariness,
            h.step,
            h.increment,
            h.armijo_slack,
        ))?;
    }
    finish(w)
}

pub fn write_convergence_csv<W: Write>(out: W, log: &[PicardRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "increment", "residual"])?;
    for r in log {
        w.serialize((r.iter, r.increment, r.residual))?;
    }
    finish(w)
}

/// Columns `k, ω_k, ψ'_k(R), ξ'_k(R), ζ'_k(R)`.
pub fn write_spectrum_csv<W: Write>(out: W, report: &StabilityReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "omega", "psi_prime_R", "xi_prime_R", "zeta_prime_R"])?;
    for (i, omega) in report.omega.iter().enumerate() {
        w.serialize((
            i + 1,
            omega,
            report.psi_slopes[i],
            report.xi_slopes[i],
            report.zeta_slopes[i],
        ))?;
    }
    finish(w)
}

/// Plot-ready columns `r φ ϕ`.
pub fn write_profiles_dat<W: Write>(mut out: W, rs: &RadialSolution) -> Result<()> {
    writeln!(out, "# r state adjoint")?;
    for (i, r) in rs.grid.nodes().iter().enumerate() {
        writeln!(out, "{r} {} {}", rs.state[i], rs.adjoint[i])?;
    }
    out.flush()?;
    Ok(())
}

/// Plot-ready columns `k ω_k`.
pub fn write_spectrum_dat<W: Write>(mut out: W, report: &StabilityReport) -> Result<()> {
    writeln!(out, "# k omega")?;
    for (i, omega) in report.omega.iter().enumerate() {
        writeln!(out, "{} {omega}", i + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// Whitespace-separated columns under a `#` header.
pub fn write_dat<W: Write>(
    mut out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    writeln!(out, "# {}", header.join(" "))?;
    for row in rows {
        let cols: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cols.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Cell centers and values, one grid row per block.
pub fn write_density_dat<W: Write>(mut out: W, density: &DensityField) -> Result<()> {
    let grid = density.grid();
    writeln!(out, "# x y value")?;
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let (x, y) = grid.cell_center(i, j);
            writeln!(out, "{x} {y} {}", density.values()[grid.cell_index(i, j)])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(create(path)?, value)
}

/// Opens `path` for one of the writers above.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    create(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn field_csv_layout() {
        let grid = Grid2D::new(1.0, 8).unwrap();
        let field = ScalarField::from_fn(grid, |x, y| x + 10.0 * y);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &field).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# n=8,L=1,h=0.25");
        assert_eq!(lines[1], "i,j,x,y,value");
        assert_eq!(lines.len(), 2 + 49);
        assert_eq!(lines[2], "1,1,-0.75,-0.75,-8.25");
    }

    #[test]
    fn density_csv_has_every_cell() {
        let grid = Grid2D::new(1.0, 8).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &DensityField::constant(grid, 0.5)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2 + 64);
    }

    #[test]
    fn convergence_log_columns() {
        let log = [PicardRecord {
            iter: 1,
            increment: 0.5,
            residual: 1e-13,
        }];
        let mut buf = Vec::new();
        write_convergence_csv(&mut buf, &log).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,increment,residual\n1,0.5,1e-13\n");
    }
}
