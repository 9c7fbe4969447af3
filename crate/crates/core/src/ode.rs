//! Adaptive Dormand–Prince 8(5,3) integration with event location.
//!
//! Every accepted step is kept as a node `(t, y, y')`, so the solution can be
//! resampled anywhere by cubic Hermite interpolation. Events are located by
//! re-stepping from the start of the bracketing step, which keeps the event
//! point at full method order instead of interpolation order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.25,
            event_tol: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rel_tol, self.abs_tol, self.max_step, self.event_tol];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "integrator settings must be positive and finite: {self:?}"
            )))
        }
    }
}

/// Right-hand side of an autonomous-or-not system `y' = f(t, y)`.
pub trait VectorFieldFn<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F> VectorFieldFn<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
}

#[derive(Clone, Debug)]
pub struct Solution<const N: usize> {
    pub nodes: Vec<Node<N>>,
    /// True when integration stopped at a located event instead of `t_end`.
    pub event_hit: bool,
    pub rejected_steps: usize,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> &Node<N> {
        self.nodes.last().expect("a solution always holds its initial node")
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    /// Cubic Hermite dense output. `t` is clamped to the integrated span.
    pub fn sample(&self, t: f64) -> [f64; N] {
        let forward = self.t_end() >= self.t_start();
        let nodes = &self.nodes;
        if nodes.len() == 1 {
            return nodes[0].y;
        }
        let key = |n: &Node<N>| if forward { n.t } else { -n.t };
        let tk = if forward { t } else { -t };
        let i = match nodes.partition_point(|n| key(n) <= tk) {
            0 => 0,
            i if i >= nodes.len() => nodes.len() - 2,
            i => i - 1,
        };
        hermite(&nodes[i], &nodes[i + 1], t)
    }
}

fn hermite<const N: usize>(a: &Node<N>, b: &Node<N>, t: f64) -> [f64; N] {
    let h = b.t - a.t;
    if h == 0.0 {
        return a.y;
    }
    let s = ((t - a.t) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    std::array::from_fn(|k| h00 * a.y[k] + h10 * h * a.dy[k] + h01 * b.y[k] + h11 * h * b.dy[k])
}

const MAX_STEPS: usize = 1_000_000;

/// Integrates `f` from `(t0, y0)` to `t_end` (which may lie before `t0`).
///
/// With `event = Some(g)`, integration stops at the first time after `t0`
/// where `g(y)` changes sign or vanishes; the final node is that point.
pub fn solve<const N: usize, F: VectorFieldFn<N> + ?Sized>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    event: Option<&dyn Fn(&[f64; N]) -> f64>,
) -> Result<Solution<N>> {
    cfg.validate()?;
    if !t0.is_finite() || !t_end.is_finite() || y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite initial data".into()));
    }
    let dy0 = f.rhs(t0, &y0);
    let mut sol = Solution {
        nodes: vec![Node { t: t0, y: y0, dy: dy0 }],
        event_hit: false,
        rejected_steps: 0,
    };
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = dy0;
    let mut g_prev = event.map(|g| g(&y));
    let mut h = dir * initial_step(f, t, &y, &k1, cfg).min(span.abs());
    let mut reject_streak = false;

    for _ in 0..MAX_STEPS {
        if (t_end - t) * dir <= 0.0 {
            return Ok(sol);
        }
        let last = (t + h - t_end) * dir >= 0.0;
        if last {
            h = t_end - t;
        }
        if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            if !last {
                return Err(Error::StepFailure { t, h });
            }
            // rounding-sized remainder: an Euler step is exact to working precision
            let y_end: [f64; N] = std::array::from_fn(|i| y[i] + h * k1[i]);
            let dy = f.rhs(t_end, &y_end);
            sol.nodes.push(Node { t: t_end, y: y_end, dy });
            return Ok(sol);
        }
        let step = dop853_step(f, t, &y, &k1, h, cfg);
        if !step.err.is_finite() {
            h *= 0.25;
            sol.rejected_steps += 1;
            reject_streak = true;
            continue;
        }
        let fac11 = step.err.powf(0.125);
        let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        if step.err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            let dy_new = f.rhs(t_new, &step.y);

            if let (Some(g), Some(g0)) = (event, g_prev) {
                let g1 = g(&step.y);
                if g0 != 0.0 && (g1 == 0.0 || g1.signum() != g0.signum()) {
                    let (tau, ye) = locate_event(f, t, &y, &k1, h, g, g0, cfg);
                    let te = t + tau;
                    let dye = f.rhs(te, &ye);
                    sol.nodes.push(Node { t: te, y: ye, dy: dye });
                    sol.event_hit = true;
                    return Ok(sol);
                }
                g_prev = Some(g1);
            }

            t = t_new;
            y = step.y;
            k1 = dy_new;
            sol.nodes.push(Node { t, y, dy: dy_new });
            if last {
                return Ok(sol);
            }
            let mut h_new = h / fac;
            if reject_streak {
                h_new = dir * h_new.abs().min(h.abs());
            }
            reject_streak = false;
            h = dir * h_new.abs().min(cfg.max_step);
        } else {
            sol.rejected_steps += 1;
            reject_streak = true;
            h /= (1.0 / FAC_MIN).min(fac11 / SAFE);
        }
    }
    Err(Error::StepFailure { t, h })
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

fn norm<const N: usize>(v: &[f64; N], y: &[f64; N], cfg: &IntegratorConfig) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs();
            (v[i] / sk).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F: VectorFieldFn<N> + ?Sized>(
    f: &F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    cfg: &IntegratorConfig,
) -> f64 {
    let dnf = norm(f0, y, cfg);
    let dny = norm(y, y, cfg);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(cfg.max_step);
    let y1: [f64; N] = std::array::from_fn(|i| y[i] + h * f0[i]);
    let f1 = f.rhs(t + h, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let der2 = norm(&diff, y, cfg) / h;
    let der12 = dnf.max(der2);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    (100.0 * h).min(h1).min(cfg.max_step)
}

struct Step<const N: usize> {
    y: [f64; N],
    err: f64,
}

/// Accumulates `y + h * sum(a_i * k_i)`.
fn combo<const N: usize>(y: &[f64; N], h: f64, parts: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut s = 0.0;
        for (a, k) in parts {
            s += a * k[i];
        }
        y[i] + h * s
    })
}

fn dop853_step<const N: usize, F: VectorFieldFn<N> + ?Sized>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    cfg: &IntegratorConfig,
) -> Step<N> {
    let k2 = f.rhs(t + C2 * h, &combo(y, h, &[(A21, k1)]));
    let k3 = f.rhs(t + C3 * h, &combo(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f.rhs(t + C4 * h, &combo(y, h, &[(A41, k1), (A43, &k3)]));
    let k5 = f.rhs(t + C5 * h, &combo(y, h, &[(A51, k1), (A53, &k3), (A54, &k4)]));
    let k6 = f.rhs(t + C6 * h, &combo(y, h, &[(A61, k1), (A64, &k4), (A65, &k5)]));
    let k7 = f.rhs(
        t + C7 * h,
        &combo(y, h, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
    );
    let k8 = f.rhs(
        t + C8 * h,
        &combo(y, h, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
    );
    let k9 = f.rhs(
        t + C9 * h,
        &combo(
            y,
            h,
            &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)],
        ),
    );
    let k10 = f.rhs(
        t + C10 * h,
        &combo(
            y,
            h,
            &[
                (A101, k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ),
    );
    let k11 = f.rhs(
        t + C11 * h,
        &combo(
            y,
            h,
            &[
                (A111, k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ),
    );
    let k12 = f.rhs(
        t + h,
        &combo(
            y,
            h,
            &[
                (A121, k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ),
    );
    let parts = [
        (B1, k1),
        (B6, &k6),
        (B7, &k7),
        (B8, &k8),
        (B9, &k9),
        (B10, &k10),
        (B11, &k11),
        (B12, &k12),
    ];
    let y_new = combo(y, h, &parts);

    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..N {
        let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
        let bsum: f64 = parts.iter().map(|(b, k)| b * k[i]).sum();
        let e2 = bsum - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        err2 += (e2 / sk).powi(2);
        let e = ER1 * k1[i]
            + ER6 * k6[i]
            + ER7 * k7[i]
            + ER8 * k8[i]
            + ER9 * k9[i]
            + ER10 * k10[i]
            + ER11 * k11[i]
            + ER12 * k12[i];
        err += (e / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err * (1.0 / (deno * N as f64)).sqrt();
    Step { y: y_new, err }
}

/// Illinois-modified regula falsi on the step fraction `tau in [0, h]`.
/// Each trial point is a fresh full-order step from the bracket start.
#[allow(clippy::too_many_arguments)]
fn locate_event<const N: usize, F: VectorFieldFn<N> + ?Sized>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    g: &dyn Fn(&[f64; N]) -> f64,
    g0: f64,
    cfg: &IntegratorConfig,
) -> (f64, [f64; N]) {
    let at = |tau: f64| -> [f64; N] {
        if tau == 0.0 {
            *y
        } else {
            dop853_step(f, t, y, k1, tau, cfg).y
        }
    };
    let (mut a, mut ga) = (0.0_f64, g0);
    let mut yb = at(h);
    let (mut b, mut gb) = (h, g(&yb));
    if gb == 0.0 {
        return (b, yb);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= cfg.event_tol {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !c.is_finite() || (c - a) * (c - b) >= 0.0 {
            c = 0.5 * (a + b);
        }
        let yc = at(c);
        let gc = g(&yc);
        if gc == 0.0 {
            return (c, yc);
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            yb = yc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    (b, yb)
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let cfg = IntegratorConfig::with_tolerance(1e-12);
        let sol = solve(&oscillator, 0.0, [1.0, 0.0], 10.0, &cfg, None).unwrap();
        let end = sol.last();
        assert_eq!(end.t, 10.0);
        assert!((end.y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((end.y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let cfg = IntegratorConfig::with_tolerance(1e-12);
        let sol = solve(&oscillator, 0.0, [1.0, 0.0], -2.0, &cfg, None).unwrap();
        assert!((sol.last().y[0] - 2f64.cos()).abs() < 1e-10);
        assert!((sol.last().y[1] - 2f64.sin()).abs() < 1e-10);
        // dense output on a descending grid
        let mid = sol.sample(-1.0);
        assert!((mid[0] - 1f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let sol = solve(&oscillator, 1.0, [0.3, 0.4], 1.0, &IntegratorConfig::default(), None)
            .unwrap();
        assert_eq!(sol.nodes.len(), 1);
        assert_eq!(sol.last().y, [0.3, 0.4]);
    }

    #[test]
    fn event_located_to_tolerance() {
        // cos(t) first vanishes at pi/2
        let cfg = IntegratorConfig::with_tolerance(1e-12);
        let g = |y: &[f64; 2]| y[0];
        let sol = solve(&oscillator, 0.0, [1.0, 0.0], 10.0, &cfg, Some(&g)).unwrap();
        assert!(sol.event_hit);
        assert!((sol.t_end() - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
        assert!(sol.last().y[0].abs() < 1e-11);
    }

    #[test]
    fn polynomial_solutions_take_maximal_steps() {
        // y' = t^2 is integrated exactly by an 8th order method
        let f = |t: f64, _y: &[f64; 1]| [t * t];
        let cfg = IntegratorConfig::default();
        let sol = solve(&f, 0.0, [0.0], 2.0, &cfg, None).unwrap();
        assert!((sol.last().y[0] - 8.0 / 3.0).abs() < 1e-13);
        assert!(sol.nodes.len() <= 20);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(solve(&oscillator, 0.0, [1.0, 0.0], 1.0, &cfg, None).is_err());
    }

    #[test]
    fn blow_up_reports_step_failure() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let f = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let cfg = IntegratorConfig::default();
        let r = solve(&f, 0.0, [1.0], 2.0, &cfg, None);
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }

    #[test]
    fn rounding_sized_interval() {
        let f = |_t: f64, _y: &[f64; 1]| [1.0];
        let cfg = IntegratorConfig::default();
        let t0 = 0.1 + 0.2;
        let sol = solve(&f, t0, [0.0], 0.3, &cfg, None).unwrap();
        assert_eq!(sol.last().t, 0.3);
        assert!(sol.last().y[0].abs() < 1e-15);
    }
}
