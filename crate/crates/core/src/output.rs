//! Text dumps of discrete solutions.
//!
//! A field file holds one block per patch. A block starts with
//! `patch <id> samples <n_u> <n_v> [<n_w>]` and is followed by one row per
//! sample point, first parametric direction fastest, with the physical
//! coordinates and the value of `u_h`. Blocks are separated by a blank line
//! and lines starting with `#` are comments.
//!
//! A coefficient file has a `patch <id> dofs <count>` header per patch and one
//! coefficient per line.

use std::fmt::Write as _;

use crate::assembly::{AssemblyError, MultiPatchProblem};

/// Samples `u_h` on a uniform `samples^d` parametric grid of every patch.
pub fn field_dump(problem: &MultiPatchProblem, coeffs: &[f64], samples: usize) -> Result<String, AssemblyError> {
    let samples = samples.max(2);
    let d = problem.dim();
    let coords = ["x", "y", "z"];
    let mut out = format!("# {} u_h\n", coords[..d].join(" "));
    for pi in 0..problem.patches().len() {
        if pi > 0 {
            out.push('\n');
        }
        let dims = vec![samples.to_string(); d].join(" ");
        writeln!(out, "patch {pi} samples {dims}").unwrap();
        let total = samples.pow(d as u32);
        for f in 0..total {
            let mut xh = [0.0; 3];
            let mut rest = f;
            for c in xh.iter_mut().take(d) {
                *c = (rest % samples) as f64 / (samples - 1) as f64;
                rest /= samples;
            }
            let (x, u, _) = problem.evaluate(coeffs, pi, &xh)?;
            let row: Vec<String> = x[..d].iter().chain([&u]).map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    Ok(out)
}

pub fn coefficient_dump(problem: &MultiPatchProblem, coeffs: &[f64]) -> String {
    let dofs = problem.dof_map();
    let mut out = String::new();
    for pi in 0..dofs.num_patches() {
        let range = dofs.patch_range(pi);
        writeln!(out, "patch {pi} dofs {}", range.len()).unwrap();
        for c in &coeffs[range] {
            writeln!(out, "{c:.17e}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::tests::two_squares;

    #[test]
    fn field_blocks_sample_the_solution() {
        let p = two_squares(2, 1, [1.0, 1.0]);
        // the bilinear coefficient layout reproduces u = x + 2 y exactly
        let mut coeffs = vec![0.0; p.dof_map().total()];
        for pi in 0..2 {
            let range = p.dof_map().patch_range(pi);
            for (local, c) in coeffs[range].iter_mut().enumerate() {
                let (i, j) = (local % 3, local / 3);
                *c = pi as f64 + i as f64 / 2.0 + 2.0 * j as f64 / 2.0;
            }
        }
        let text = field_dump(&p, &coeffs, 3).unwrap();
        let blocks: Vec<&str> = text.split("\n\n").collect();
        assert_eq!(blocks.len(), 2);
        assert!(blocks[1].starts_with("patch 1 samples 3 3"));
        let rows: Vec<&str> =
            text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("patch") && !l.is_empty()).collect();
        assert_eq!(rows.len(), 18);
        for line in rows {
            let v: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
            assert_eq!(v.len(), 3);
            assert!((v[2] - (v[0] + 2.0 * v[1])).abs() < 1e-12, "{line}");
        }
    }

    #[test]
    fn coefficients_grouped_per_patch() {
        let p = two_squares(1, 1, [1.0, 1.0]);
        let coeffs: Vec<f64> = (0..8).map(f64::from).collect();
        let text = coefficient_dump(&p, &coeffs);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "patch 0 dofs 4");
        assert_eq!(lines[5], "patch 1 dofs 4");
        assert_eq!(lines[9].parse::<f64>().unwrap(), 7.0);
    }
}
