//! Planar geometry helpers shared by the grid builder and the singular
//! quadrature: polygon moments, rectangle/disc overlap, and the exact area
//! integral of the Cauchy kernel over a polygon.

use num_complex::Complex64 as C64;

/// Signed area of a polygon (positive for counterclockwise vertex order).
pub fn polygon_signed_area(verts: &[C64]) -> f64 {
    let n = verts.len();
    let mut acc = 0.0;
    for k in 0..n {
        let a = verts[k];
        let b = verts[(k + 1) % n];
        acc += a.re * b.im - b.re * a.im;
    }
    0.5 * acc
}

pub fn polygon_centroid(verts: &[C64]) -> C64 {
    let n = verts.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut a2 = 0.0;
    for k in 0..n {
        let a = verts[k];
        let b = verts[(k + 1) % n];
        let cross = a.re * b.im - b.re * a.im;
        a2 += cross;
        cx += (a.re + b.re) * cross;
        cy += (a.im + b.im) * cross;
    }
    if a2.abs() < f64::MIN_POSITIVE {
        let s: C64 = verts.iter().sum();
        return s / n as f64;
    }
    C64::new(cx / (3.0 * a2), cy / (3.0 * a2))
}

/// Convex hull (Andrew's monotone chain), counterclockwise, no repeated end point.
pub fn convex_hull(points: &[C64]) -> Vec<C64> {
    let mut pts: Vec<C64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: C64, a: C64, b: C64| (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re);
    let mut hull: Vec<C64> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Exact area of `[x0,x1] x [y0,y1]` intersected with the disc of radius `r`
/// centred at `c`.
pub fn rect_disc_area(x0: f64, x1: f64, y0: f64, y1: f64, c: C64, r: f64) -> f64 {
    let (x0, x1, y0, y1) = (x0 - c.re, x1 - c.re, y0 - c.im, y1 - c.im);
    let lo = x0.max(-r);
    let hi = x1.min(r);
    if hi <= lo {
        return 0.0;
    }
    let s = |x: f64| ((r - x) * (r + x)).max(0.0).sqrt();
    // antiderivative of s(x)
    let big_s = |x: f64| 0.5 * (x * s(x) + r * r * x.atan2(s(x)));
    let mut breaks = vec![lo, hi];
    for y in [y0, y1] {
        if y.abs() < r {
            let xb = (r * r - y * y).sqrt();
            for x in [-xb, xb] {
                if x > lo && x < hi {
                    breaks.push(x);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let sm = s(mid);
        let upper_const = y1 < sm;
        let lower_const = y0 > -sm;
        let up_mid = if upper_const { y1 } else { sm };
        let low_mid = if lower_const { y0 } else { -sm };
        if up_mid <= low_mid {
            continue;
        }
        let int_up = if upper_const { y1 * (b - a) } else { big_s(b) - big_s(a) };
        let int_low = if lower_const { y0 * (b - a) } else { -(big_s(b) - big_s(a)) };
        area += int_up - int_low;
    }
    area
}

/// Polygon approximating `rect ∩ disc`, counterclockwise.
pub fn rect_disc_polygon(x0: f64, x1: f64, y0: f64, y1: f64, c: C64, r: f64, arc_samples: usize) -> Vec<C64> {
    let inside_rect = |z: C64| z.re >= x0 - 1e-14 && z.re <= x1 + 1e-14 && z.im >= y0 - 1e-14 && z.im <= y1 + 1e-14;
    let inside_disc = |z: C64| (z - c).norm() <= r * (1.0 + 1e-14);
    let corners = [C64::new(x0, y0), C64::new(x1, y0), C64::new(x1, y1), C64::new(x0, y1)];
    let mut pts: Vec<C64> = corners.iter().copied().filter(|&z| inside_disc(z)).collect();
    // edge/circle intersections
    for k in 0..4 {
        let a = corners[k] - c;
        let b = corners[(k + 1) % 4] - c;
        let d = b - a;
        let qa = d.norm_sqr();
        let qb = 2.0 * (a.re * d.re + a.im * d.im);
        let qc = a.norm_sqr() - r * r;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                if (0.0..=1.0).contains(&t) {
                    pts.push(c + a + d * t);
                }
            }
        }
    }
    // arc points lying in the rectangle
    let mut angles: Vec<f64> = pts.iter().filter(|&&z| ((z - c).norm() - r).abs() <= 1e-12 * r.max(1.0)).map(|&z| (z - c).arg()).collect();
    angles.sort_by(f64::total_cmp);
    let total = 4 * arc_samples.max(1);
    for k in 0..total {
        let t = 2.0 * std::f64::consts::PI * k as f64 / total as f64;
        let z = c + C64::from_polar(r, t);
        if inside_rect(z) {
            pts.push(z);
        }
    }
    for w in angles.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let z = c + C64::from_polar(r, mid);
        if inside_rect(z) {
            for s in 1..arc_samples {
                let t = w[0] + (w[1] - w[0]) * s as f64 / arc_samples as f64;
                pts.push(c + C64::from_polar(r, t));
            }
        }
    }
    convex_hull(&pts)
}

/// Exact value of `∫∫_P dA(ζ) / (ζ - z)` for a polygon `P` with
/// counterclockwise vertices. The integral is weakly singular, so it is well
/// defined (as an ordinary Lebesgue integral) for `z` anywhere, including
/// inside `P` or on its boundary.
///
/// Uses `∂/∂ζ̄ [(ζ̄ - z̄)/(ζ - z)] = 1/(ζ - z)` and the complex Green formula,
/// which turns the area integral into a sum of closed-form edge terms.
pub fn cauchy_polygon_integral(verts: &[C64], z: C64) -> C64 {
    let n = verts.len();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let a = verts[k];
        let b = verts[(k + 1) % n];
        let alpha = a - z;
        let beta = b - a;
        acc += beta.conj();
        let im = (alpha.conj() * beta).im;
        let scale = alpha.norm() * beta.norm();
        if im.abs() > 1e-14 * scale && scale > 0.0 {
            let coef = C64::new(0.0, 2.0 * im) / beta;
            acc += coef * ((b - z) / alpha).ln();
        }
    }
    acc / C64::new(0.0, 2.0)
}
