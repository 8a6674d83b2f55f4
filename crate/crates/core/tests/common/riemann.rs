//! Exact solution of the ideal-gas Riemann problem (two-rarefaction / shock
//! iteration on the star pressure), used as an independent oracle.

#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

fn pressure_function(p: f64, s: Primitive, gamma: f64) -> (f64, f64) {
    let c = (gamma * s.p / s.rho).sqrt();
    if p > s.p {
        let a = 2.0 / ((gamma + 1.0) * s.rho);
        let b = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let sq = (a / (p + b)).sqrt();
        let f = (p - s.p) * sq;
        let df = sq * (1.0 - 0.5 * (p - s.p) / (b + p));
        (f, df)
    } else {
        let pr = p / s.p;
        let f = 2.0 * c / (gamma - 1.0) * (pr.powf((gamma - 1.0) / (2.0 * gamma)) - 1.0);
        let df = 1.0 / (s.rho * c) * pr.powf(-(gamma + 1.0) / (2.0 * gamma));
        (f, df)
    }
}

pub fn star_state(l: Primitive, r: Primitive, gamma: f64) -> (f64, f64) {
    let mut p = 0.5 * (l.p + r.p);
    for _ in 0..100 {
        let (fl, dfl) = pressure_function(p, l, gamma);
        let (fr, dfr) = pressure_function(p, r, gamma);
        let next = (p - (fl + fr + r.u - l.u) / (dfl + dfr)).max(1e-12);
        if (next - p).abs() < 1e-14 * p {
            p = next;
            break;
        }
        p = next;
    }
    let (fl, _) = pressure_function(p, l, gamma);
    let (fr, _) = pressure_function(p, r, gamma);
    (p, 0.5 * (l.u + r.u) + 0.5 * (fr - fl))
}

/// Samples the self-similar solution at ξ = (x − x0)/t.
pub fn sample(l: Primitive, r: Primitive, gamma: f64, xi: f64) -> Primitive {
    let (ps, us) = star_state(l, r, gamma);
    let g = gamma;
    if xi <= us {
        let c = (g * l.p / l.rho).sqrt();
        if ps > l.p {
            let sl = l.u - c * ((g + 1.0) / (2.0 * g) * ps / l.p + (g - 1.0) / (2.0 * g)).sqrt();
            if xi <= sl {
                l
            } else {
                let rho = l.rho * ((ps / l.p + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * ps / l.p + 1.0));
                Primitive { rho, u: us, p: ps }
            }
        } else {
            let head = l.u - c;
            let cs = c * (ps / l.p).powf((g - 1.0) / (2.0 * g));
            let tail = us - cs;
            if xi <= head {
                l
            } else if xi >= tail {
                Primitive {
                    rho: l.rho * (ps / l.p).powf(1.0 / g),
                    u: us,
                    p: ps,
                }
            } else {
                let k = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * c) * (l.u - xi);
                Primitive {
                    rho: l.rho * k.powf(2.0 / (g - 1.0)),
                    u: 2.0 / (g + 1.0) * (c + (g - 1.0) / 2.0 * l.u + xi),
                    p: l.p * k.powf(2.0 * g / (g - 1.0)),
                }
            }
        }
    } else {
        let c = (g * r.p / r.rho).sqrt();
        if ps > r.p {
            let sr = r.u + c * ((g + 1.0) / (2.0 * g) * ps / r.p + (g - 1.0) / (2.0 * g)).sqrt();
            if xi >= sr {
                r
            } else {
                let rho = r.rho * ((ps / r.p + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * ps / r.p + 1.0));
                Primitive { rho, u: us, p: ps }
            }
        } else {
            let head = r.u + c;
            let cs = c * (ps / r.p).powf((g - 1.0) / (2.0 * g));
            let tail = us + cs;
            if xi >= head {
                r
            } else if xi <= tail {
                Primitive {
                    rho: r.rho * (ps / r.p).powf(1.0 / g),
                    u: us,
                    p: ps,
                }
            } else {
                let k = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * c) * (r.u - xi);
                Primitive {
                    rho: r.rho * k.powf(2.0 / (g - 1.0)),
                    u: 2.0 / (g + 1.0) * (-c + (g - 1.0) / 2.0 * r.u + xi),
                    p: r.p * k.powf(2.0 * g / (g - 1.0)),
                }
            }
        }
    }
}

#[allow(dead_code)]
pub fn sod_left() -> Primitive {
    Primitive {
        rho: 1.0,
        u: 0.0,
        p: 1.0,
    }
}

#[allow(dead_code)]
pub fn sod_right() -> Primitive {
    Primitive {
        rho: 0.125,
        u: 0.0,
        p: 0.1,
    }
}
