use super::{Channel, PoseFrame, Skeleton};

/// Row-major 3x3 matrix acting on column vectors.
pub type Mat3 = [[f64; 3]; 3];

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn axis_rotation(axis: usize, degrees: f64) -> Mat3 {
    let (s, c) = degrees.to_radians().sin_cos();
    match axis {
        0 => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        1 => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        _ => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

/// Local rotation of a joint: axis rotations composed intrinsically in the
/// order the channels are declared (`R = R_first * R_second * R_third`).
pub fn rotation_matrix(channels: &[Channel], values: &[f64]) -> Mat3 {
    channels
        .iter()
        .zip(values)
        .filter(|(c, _)| c.is_rotation())
        .fold(IDENTITY, |acc, (c, &v)| {
            if v == 0.0 {
                acc
            } else {
                mul(&acc, &axis_rotation(c.axis(), v))
            }
        })
}

/// World joint positions for one motion row.
///
/// Panics if `frame` does not hold exactly one value per declared channel.
pub fn forward_kinematics(skeleton: &Skeleton, frame: &[f64]) -> PoseFrame {
    assert_eq!(
        frame.len(),
        skeleton.channel_count(),
        "frame length does not match the skeleton's channel count"
    );
    let n = skeleton.len();
    let mut positions = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut world: Vec<Mat3> = Vec::with_capacity(n);
    for joint in skeleton.joints() {
        let values = &frame[joint.channel_start..joint.channel_start + joint.channels.len()];
        let local = rotation_matrix(&joint.channels, values);
        let mut euler = [0.0; 3];
        for (c, &v) in joint.channels.iter().zip(values) {
            if c.is_rotation() {
                euler[c.axis()] = v;
            }
        }
        rotations.push(euler);
        match joint.parent {
            None => {
                let mut p = joint.offset;
                for (c, &v) in joint.channels.iter().zip(values) {
                    if !c.is_rotation() {
                        p[c.axis()] += v;
                    }
                }
                positions.push(p);
                world.push(local);
            }
            Some(parent) => {
                let base: [f64; 3] = positions[parent];
                let d = apply(&world[parent], joint.offset);
                positions.push([base[0] + d[0], base[1] + d[1], base[2] + d[2]]);
                world.push(mul(&world[parent], &local));
            }
        }
    }
    PoseFrame {
        positions,
        rotations,
    }
}
