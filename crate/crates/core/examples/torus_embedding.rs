//! Basepoint choice, the box embedding and the fibers of its boundary.

use interlace::lattice::{choose_basepoint, union_of_windows, BoxEmbedding, Point, PointSet, TorusGeometry};

fn main() -> interlace::Result<()> {
    let geom = TorusGeometry::new(12, 3)?;
    let tromino = PointSet::lattice(3, [[0, 0, 0], [1, 0, 0], [0, 1, 0]].map(|c| Point::new(c.to_vec())))?;
    let windows = vec![tromino.clone(), tromino];
    let centers = vec![Point::splat(3, 0), Point::splat(3, 6)];
    let b = union_of_windows(&centers, &windows, &geom)?;
    let choice = choose_basepoint(&centers, &windows, &geom)?;
    println!("|B| = {}  basepoint = {:?}  margin = {}", b.len(), choice.basepoint, choice.margin);

    let emb = BoxEmbedding::new(geom, choice.basepoint)?;
    for x in b.iter() {
        println!("  {:?} -> {:?}", x, emb.psi(x));
    }
    let sets = emb.boundary_sets();
    println!("|C| = {}  |S| = {}", sets.c.len(), sets.s.len());
    let fibers = emb.assign_fibers(&sets.s)?;
    for (x, f) in fibers.iter().take(3) {
        let pts = f.points(&geom);
        println!(
            "  fiber at {:?}: axis {} {}  ends at {:?}",
            x,
            f.axis,
            if f.positive { "+" } else { "-" },
            emb.psi(&pts[pts.len() - 1])
        );
    }
    Ok(())
}
