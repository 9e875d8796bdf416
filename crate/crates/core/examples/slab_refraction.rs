//! Traces lines through a glass plate and compares the lateral shift with
//! the closed form `t·sin(θi − θt)/cos θt`.
//!
//! ```text
//! cargo run --example slab_refraction -- [index] [thickness]
//! ```

use glassnerf::geometry::Vec3;
use glassnerf::oracle::{lateral_shift, trace_through_slab, Line, Slab};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let index: f64 = args.next().map_or(Ok(1.45), |s| s.parse())?;
    let thickness: f64 = args.next().map_or(Ok(1.0), |s| s.parse())?;
    let slab = Slab {
        point: Vec3::ZERO,
        normal: Vec3::new(0.0, 0.0, 1.0),
        thickness,
        index,
        half_u: 100.0,
        half_v: 100.0,
    };
    println!("{:>6} {:>10} {:>10} {:>12}", "θi°", "traced", "closed", "exit·entry");
    for deg in (0..=80).step_by(10) {
        let th = (deg as f64).to_radians();
        let dir = Vec3::new(th.sin(), 0.0, -th.cos());
        let line = Line {
            origin: Vec3::new(0.0, 0.0, 5.0) - dir * 1.0,
            direction: dir,
        };
        let crossing = trace_through_slab(&line, &slab);
        println!(
            "{:>6} {:>10.6} {:>10.6} {:>12.9}",
            deg,
            crossing.lateral_shift(&line),
            lateral_shift(th, index, thickness),
            crossing.exit.direction.dot(dir)
        );
    }
    Ok(())
}
