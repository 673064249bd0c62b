use std::fmt::Write as _;
use std::path::Path;

use super::{Motion, Skeleton};
use crate::{Error, Result};

/// Serializes a skeleton and its motion as BVH text. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_bvh(skeleton: &Skeleton, motion: &Motion) -> String {
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, skeleton, 0, 0);
    let _ = writeln!(out, "MOTION");
    let _ = writeln!(out, "Frames: {}", motion.frame_count());
    let _ = writeln!(out, "Frame Time: {}", motion.frame_time());
    for frame in motion.frames() {
        let mut first = true;
        for v in frame {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

fn write_joint(out: &mut String, skeleton: &Skeleton, index: usize, depth: usize) {
    let joint = skeleton.joint(index);
    let indent = "\t".repeat(depth);
    let keyword = if index == 0 { "ROOT" } else { "JOINT" };
    let [x, y, z] = joint.offset;
    let _ = writeln!(out, "{indent}{keyword} {}", joint.name);
    let _ = writeln!(out, "{indent}{{");
    let _ = writeln!(out, "{indent}\tOFFSET {x} {y} {z}");
    let _ = write!(out, "{indent}\tCHANNELS {}", joint.channels.len());
    for c in &joint.channels {
        let _ = write!(out, " {c}");
    }
    out.push('\n');
    for &child in &joint.children {
        write_joint(out, skeleton, child, depth + 1);
    }
    if let Some([x, y, z]) = joint.end_site {
        let _ = writeln!(out, "{indent}\tEnd Site");
        let _ = writeln!(out, "{indent}\t{{");
        let _ = writeln!(out, "{indent}\t\tOFFSET {x} {y} {z}");
        let _ = writeln!(out, "{indent}\t}}");
    }
    let _ = writeln!(out, "{indent}}}");
}

pub fn write_bvh_file(path: impl AsRef<Path>, skeleton: &Skeleton, motion: &Motion) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_bvh(skeleton, motion)).map_err(|e| Error::io(path, e))
}
