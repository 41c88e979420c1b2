//! Legacy ASCII VTK writers (structured grids only).

use std::io::Write;

use crate::error::Result;
use crate::fmt17;
use crate::mesh::{CellTag, Mesh};
use crate::vec3::{Cplx3, Real3};

const HEADER: &str = "# vtk DataFile Version 3.0";

fn write_points<W: Write>(w: &mut W, title: &str, dims: [usize; 3], points: &[Real3]) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_GRID")?;
    writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(w, "{} {} {}", fmt17(p[0]), fmt17(p[1]), fmt17(p[2]))?;
    }
    Ok(())
}

/// Mesh nodes with one pair of `<name>_re` / `<name>_im` vector arrays per
/// nodal field, and the cell tags (1 = obstacle).
pub fn write_fields<W: Write>(mut w: W, mesh: &Mesh, fields: &[(&str, &[Cplx3])]) -> Result<()> {
    let m = mesh.n + 1;
    write_points(&mut w, "emenclose field", [m; 3], &mesh.nodes)?;
    writeln!(w, "POINT_DATA {}", mesh.nodes.len())?;
    for (name, values) in fields {
        for (part, pick) in [("re", 0), ("im", 1)] {
            writeln!(w, "VECTORS {name}_{part} double")?;
            for v in values.iter() {
                let c = v.map(|z| if pick == 0 { z.re } else { z.im });
                writeln!(w, "{} {} {}", fmt17(c[0]), fmt17(c[1]), fmt17(c[2]))?;
            }
        }
    }
    writeln!(w, "CELL_DATA {}", mesh.tags.len())?;
    writeln!(w, "SCALARS obstacle int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in &mesh.tags {
        writeln!(w, "{}", u8::from(*t == CellTag::Obstacle))?;
    }
    Ok(())
}

/// Boolean point data on a regular grid (`x` fastest).
pub fn write_membership<W: Write>(mut w: W, lo: Real3, spacing: Real3, dims: [usize; 3], inside: &[bool]) -> Result<()> {
    let mut points = Vec::with_capacity(inside.len());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                points.push([
                    lo[0] + i as f64 * spacing[0],
                    lo[1] + j as f64 * spacing[1],
                    lo[2] + k as f64 * spacing[2],
                ]);
            }
        }
    }
    write_points(&mut w, "emenclose hull membership", dims, &points)?;
    writeln!(w, "POINT_DATA {}", inside.len())?;
    writeln!(w, "SCALARS inside int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for b in inside {
        writeln!(w, "{}", u8::from(*b))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::DomainGeometry;
    use crate::mesh::build_mesh;
    use crate::vec3::CZERO3;

    #[test]
    fn field_file_layout() {
        let mesh = build_mesh(&DomainGeometry::default_experiment(), 4).unwrap();
        let zero = vec![CZERO3; mesh.num_nodes()];
        let mut buf = Vec::new();
        write_fields(&mut buf, &mesh, &[("E", &zero)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[3], "DATASET STRUCTURED_GRID");
        assert_eq!(lines[4], "DIMENSIONS 5 5 5");
        assert_eq!(lines[5], "POINTS 125 double");
        assert!(text.contains("POINT_DATA 125\nVECTORS E_re double\n"));
        assert!(text.contains("VECTORS E_im double"));
        // header 6 + points 125 + POINT_DATA 1 + 2×(1+125) + cell block 3 + 64
        assert_eq!(lines.len(), 6 + 125 + 1 + 2 * 126 + 3 + 64);
    }

    #[test]
    fn membership_counts() {
        let inside = [true, false, false, true, true, false, false, true];
        let mut buf = Vec::new();
        write_membership(&mut buf, [0.0; 3], [1.0; 3], [2, 2, 2], &inside).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("POINTS 8 double"));
        assert_eq!(text.lines().rev().take(8).filter(|l| *l == "1").count(), 4);
    }
}
