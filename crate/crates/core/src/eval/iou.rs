use crate::sensorio::{Box2D, Box3D};

/// BEV corners of a yaw-rotated box, counter-clockwise.
fn bev_corners(b: &Box3D) -> [[f64; 2]; 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hl, hw) = (b.l / 2.0, b.w / 2.0);
    let rot = |dx: f64, dy: f64| [b.cx + c * dx - s * dy, b.cy + s * dx + c * dy];
    [rot(hl, hw), rot(-hl, hw), rot(-hl, -hw), rot(hl, -hw)]
}

fn shoelace_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    acc.abs() / 2.0
}

/// Sutherland-Hodgman clip of a convex polygon against one half-plane
/// (left of the directed edge a -> b).
fn clip_edge(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let prev = poly[(i + n - 1) % n];
        let cur_in = inside(cur) >= 0.0;
        let prev_in = inside(prev) >= 0.0;
        if cur_in != prev_in {
            // intersection of segment prev->cur with the edge line
            let d1 = inside(prev);
            let d2 = inside(cur);
            let t = d1 / (d1 - d2);
            out.push([
                prev[0] + t * (cur[0] - prev[0]),
                prev[1] + t * (cur[1] - prev[1]),
            ]);
        }
        if cur_in {
            out.push(cur);
        }
    }
    out
}

/// Area of the intersection of two convex polygons (both CCW).
fn convex_intersection_area(subject: &[[f64; 2]; 4], clip: &[[f64; 2]; 4]) -> f64 {
    let mut poly: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..4 {
        if poly.is_empty() {
            return 0.0;
        }
        poly = clip_edge(&poly, clip[i], clip[(i + 1) % 4]);
    }
    shoelace_area(&poly)
}

/// Deterministic total order on boxes so the IoU is exactly symmetric.
fn box_key(b: &Box3D) -> [f64; 7] {
    [b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw]
}

/// 3D IoU of two yaw-rotated boxes: exact convex polygon clipping in BEV
/// times the vertical interval overlap. Symmetric, in [0, 1].
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    // canonical argument order makes iou3d(a, b) bit-identical to iou3d(b, a)
    let (a, b) = if box_key(a) <= box_key(b) { (a, b) } else { (b, a) };
    let za = (a.cz - a.h / 2.0, a.cz + a.h / 2.0);
    let zb = (b.cz - b.h / 2.0, b.cz + b.h / 2.0);
    let dz = (za.1.min(zb.1) - za.0.max(zb.0)).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let inter_bev = convex_intersection_area(&bev_corners(a), &bev_corners(b));
    let inter = inter_bev * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Axis-aligned 2D IoU.
pub fn iou2d(a: &Box2D, b: &Box2D) -> f64 {
    let ix = (a.u_min + a.w).min(b.u_min + b.w) - a.u_min.max(b.u_min);
    let iy = (a.v_min + a.h).min(b.v_min + b.h) - a.v_min.max(b.v_min);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}
