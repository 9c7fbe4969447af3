use std::fmt::Write;

use clap::ValueEnum;

use elab_core::reachability::ReachCloud;
use elab_core::Point;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const CURVE_SAMPLES: usize = 200;
pub const DEFAULT_SLICE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Plane {
    Xy,
    Xz,
    Xw,
    Yz,
}

impl Plane {
    fn axes(self) -> (&'static str, &'static str) {
        match self {
            Plane::Xy => ("x", "y"),
            Plane::Xz => ("x", "z"),
            Plane::Xw => ("x", "w"),
            Plane::Yz => ("y", "z"),
        }
    }

    fn coords(self, q: &Point) -> (f64, f64) {
        match self {
            Plane::Xy => (q.x, q.y),
            Plane::Xz => (q.x, q.z),
            Plane::Xw => (q.x, q.w),
            Plane::Yz => (q.y, q.z),
        }
    }

    /// Which endpoints the plane shows: all for `xy`, a slab in the hidden
    /// horizontal coordinate otherwise.
    fn keeps(self, q: &Point, slice: f64) -> bool {
        match self {
            Plane::Xy => true,
            Plane::Xz | Plane::Xw => q.y.abs() <= slice,
            Plane::Yz => (q.x - 1.0).abs() <= slice,
        }
    }

    fn slice_label(self, slice: f64) -> String {
        match self {
            Plane::Xy => "all endpoints".into(),
            Plane::Xz | Plane::Xw => format!("|y| <= {slice}"),
            Plane::Yz => format!("|x - 1| <= {slice}"),
        }
    }

    /// Reference curves drawn over the scatter.
    fn overlays(self, x_max: f64, slice: f64) -> Vec<(&'static str, Vec<(f64, f64)>)> {
        let ts = |a: f64, b: f64| (0..=CURVE_SAMPLES).map(move |k| a + (b - a) * k as f64 / CURVE_SAMPLES as f64);
        let curve = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| ts(a, b).map(|t| (t, f(t))).collect::<Vec<_>>();
        match self {
            Plane::Xy => vec![
                ("y = x", curve(0.0, x_max, &|x| x)),
                ("y = -x", curve(0.0, x_max, &|x| -x)),
            ],
            Plane::Xz => vec![
                ("z = x²/4", curve(0.0, x_max, &|x| 0.25 * x * x)),
                ("z = -x²/4", curve(0.0, x_max, &|x| -0.25 * x * x)),
            ],
            Plane::Xw => {
                let d = slice;
                vec![
                    ("w = 0", curve(0.0, x_max, &|_| 0.0)),
                    ("w = -(xδ² + δ³)/4", curve(0.0, x_max, &|x| -0.25 * (x * d * d + d * d * d))),
                ]
            }
            Plane::Yz => vec![
                ("z = (1 - y²)/4", curve(-1.0, 1.0, &|y| 0.25 * (1.0 - y * y))),
                ("z = -(1 - y²)/4", curve(-1.0, 1.0, &|y| -0.25 * (1.0 - y * y))),
            ],
        }
    }
}

struct Frame {
    lo: (f64, f64),
    hi: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (a, b) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            lo = (lo.0.min(a), lo.1.min(b));
            hi = (hi.0.max(a), hi.1.max(b));
        }
        if lo.0 > hi.0 {
            return Self { lo: (-1.0, -1.0), hi: (1.0, 1.0) };
        }
        let pad = |l: f64, h: f64| {
            let span = if h > l { h - l } else { 1.0 };
            (l - 0.05 * span, h + 0.05 * span)
        };
        let (x0, x1) = pad(lo.0, hi.0);
        let (y0, y1) = pad(lo.1, hi.1);
        Self { lo: (x0, y0), hi: (x1, y1) }
    }

    fn map(&self, (a, b): (f64, f64)) -> (f64, f64) {
        let px = MARGIN + (a - self.lo.0) / (self.hi.0 - self.lo.0) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (b - self.lo.1) / (self.hi.1 - self.lo.1) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }
}

/// Self-contained SVG scatter of the cloud projected to `plane`.
pub fn render(cloud: &ReachCloud, plane: Plane, slice: Option<f64>) -> String {
    let slice = slice.unwrap_or(DEFAULT_SLICE);
    let points: Vec<(f64, f64)> = cloud
        .endpoints
        .iter()
        .map(|e| e.point())
        .filter(|q| plane.keeps(q, slice))
        .map(|q| plane.coords(&q))
        .collect();
    let x_max = cloud.endpoints.iter().map(|e| e.x).fold(1.0, f64::max);
    let overlays = plane.overlays(x_max, slice);
    let frame = Frame::fit(points.iter().copied().chain(overlays.iter().flat_map(|(_, c)| c.iter().copied())));
    let (xlabel, ylabel) = plane.axes();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bl, tr) = (frame.map(frame.lo), frame.map(frame.hi));
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        bl.0,
        tr.1,
        tr.0 - bl.0,
        bl.1 - tr.1
    );
    for (k, (a, b)) in [(frame.lo.0, frame.hi.0), (frame.lo.1, frame.hi.1)].into_iter().enumerate() {
        for i in 0..=4 {
            let v = a + (b - a) * i as f64 / 4.0;
            let (x, y, anchor) = if k == 0 {
                (frame.map((v, frame.lo.1)).0, HEIGHT - MARGIN + 16.0, "middle")
            } else {
                (MARGIN - 6.0, frame.map((frame.lo.0, v)).1 + 4.0, "end")
            };
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="{anchor}">{v:.3}</text>"#);
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{xlabel}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{} endpoints, {}</text>"#,
        WIDTH / 2.0,
        points.len(),
        plane.slice_label(slice)
    );
    let _ = writeln!(s, r#"<g fill="steelblue" fill-opacity="0.5">"#);
    for p in &points {
        let (x, y) = frame.map(*p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2"/>"#);
    }
    let _ = writeln!(s, "</g>");
    for (i, (label, curve)) in overlays.iter().enumerate() {
        let path: Vec<String> = curve
            .iter()
            .map(|p| {
                let (x, y) = frame.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let colour = if i == 0 { "firebrick" } else { "darkorange" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"><title>{label}</title></polyline>"#,
            path.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{colour}">{label}</text>"#,
            WIDTH - MARGIN - 130.0,
            MARGIN + 14.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use elab_core::reachability::CloudEndpoint;

    fn cloud(points: &[(f64, f64, f64, f64)]) -> ReachCloud {
        ReachCloud {
            seed: 0,
            sampler: None,
            frame_id: "flat".into(),
            projected: false,
            endpoints: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y, z, w))| CloudEndpoint { path_id: i as u64, x, y, z, w, length: 0.0, truncated: false })
                .collect(),
        }
    }

    #[test]
    fn empty_cloud_has_axes_only() {
        let svg = render(&cloud(&[]), Plane::Xy, None);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("<circle"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn slices_filter_points() {
        let c = cloud(&[(0.5, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0), (1.0, 0.2, 0.01, 0.0)]);
        assert_eq!(render(&c, Plane::Xy, None).matches("<circle").count(), 3);
        assert_eq!(render(&c, Plane::Xw, None).matches("<circle").count(), 1);
        assert_eq!(render(&c, Plane::Xw, Some(0.5)).matches("<circle").count(), 3);
        assert_eq!(render(&c, Plane::Yz, None).matches("<circle").count(), 1);
    }
}
