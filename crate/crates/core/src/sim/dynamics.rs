use crate::config::VehicleConfig;
use crate::error::{Error, Result};
use crate::geom::wrap_angle;

const G: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub delta: f64,
    pub beta: f64,
    pub omega: f64,
    /// Lap-unwrapped Frenet progress (m).
    pub s: f64,
}

impl VehicleState {
    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi), ..Default::default() }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.v, self.delta, self.beta, self.omega, self.s]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub delta_des: f64,
    pub v_des: f64,
}

impl ControlInput {
    pub fn new(delta_des: f64, v_des: f64) -> Self {
        Self { delta_des, v_des }
    }

    pub fn stop() -> Self {
        Self::default()
    }
}

// [x, y, delta, v, psi, omega, beta]
type Ode = [f64; 7];

fn steering_rate(p: &VehicleConfig, delta: f64, delta_des: f64, dt: f64) -> f64 {
    let target = delta_des.clamp(-p.steer_max, p.steer_max);
    ((target - delta) / dt).clamp(-p.steer_rate_max, p.steer_rate_max)
}

fn acceleration(p: &VehicleConfig, v: f64, v_des: f64) -> f64 {
    let v_des = v_des.clamp(0.0, p.v_max);
    let kp = 10.0 * p.accel_max / p.v_max;
    let upper = if v > p.v_accel_switch { p.accel_max * p.v_accel_switch / v } else { p.accel_max };
    let a = (kp * (v_des - v)).clamp(-p.accel_max, upper);
    if (a < 0.0 && v <= 0.0) || (a > 0.0 && v >= p.v_max) {
        0.0
    } else {
        a
    }
}

fn kinematic_rhs(p: &VehicleConfig, y: &Ode, a: f64, sv: f64) -> Ode {
    let [_, _, delta, v, psi, _, _] = *y;
    let l = p.wheelbase();
    let beta = (p.lr / l * delta.tan()).atan();
    [
        v * (psi + beta).cos(),
        v * (psi + beta).sin(),
        sv,
        a,
        v * beta.cos() * delta.tan() / l,
        0.0,
        0.0,
    ]
}

fn dynamic_rhs(p: &VehicleConfig, y: &Ode, a: f64, sv: f64) -> Ode {
    let [_, _, delta, v, psi, omega, beta] = *y;
    let l = p.wheelbase();
    let (lf, lr, h) = (p.lf, p.lr, p.cg_height);
    let (cf, cr, mu, m, iz) = (p.cs_front, p.cs_rear, p.mu, p.mass, p.inertia_z);
    let front = G * lr - a * h;
    let rear = G * lf + a * h;
    let omega_dot = -mu * m / (v * iz * l) * (lf * lf * cf * front + lr * lr * cr * rear) * omega
        + mu * m / (iz * l) * (lr * cr * rear - lf * cf * front) * beta
        + mu * m / (iz * l) * lf * cf * front * delta;
    let beta_dot = (mu / (v * v * l) * (cr * rear * lr - cf * front * lf) - 1.0) * omega
        - mu / (v * l) * (cr * rear + cf * front) * beta
        + mu / (v * l) * cf * front * delta;
    [v * (psi + beta).cos(), v * (psi + beta).sin(), sv, a, omega, omega_dot, beta_dot]
}

fn rk4(y: &Ode, dt: f64, f: impl Fn(&Ode) -> Ode) -> Ode {
    let k1 = f(y);
    let k2 = f(&std::array::from_fn(|i| y[i] + 0.5 * dt * k1[i]));
    let k3 = f(&std::array::from_fn(|i| y[i] + 0.5 * dt * k2[i]));
    let k4 = f(&std::array::from_fn(|i| y[i] + dt * k3[i]));
    std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Advances the single-track model by `dt`. Progress `s` is left untouched.
///
/// Below `v_kinematic` the kinematic bicycle is integrated instead and the
/// slip angle and yaw rate are reset to their kinematic values.
pub fn step_dynamics(state: &VehicleState, u: ControlInput, dt: f64, p: &VehicleConfig) -> Result<VehicleState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !state.is_finite() || !u.delta_des.is_finite() || !u.v_des.is_finite() {
        return Err(Error::NonFinite("vehicle state or control".into()));
    }
    let sv = steering_rate(p, state.delta, u.delta_des, dt);
    let a = acceleration(p, state.v, u.v_des);
    let y0: Ode = [state.x, state.y, state.delta, state.v, state.psi, state.omega, state.beta];
    let kinematic = state.v.abs() < p.v_kinematic;
    let y = if kinematic {
        rk4(&y0, dt, |y| kinematic_rhs(p, y, a, sv))
    } else {
        rk4(&y0, dt, |y| dynamic_rhs(p, y, a, sv))
    };
    let delta = y[2].clamp(-p.steer_max, p.steer_max);
    let v = y[3].clamp(0.0, p.v_max);
    let (omega, beta) = if kinematic {
        let beta = (p.lr / p.wheelbase() * delta.tan()).atan();
        (v * beta.cos() * delta.tan() / p.wheelbase(), beta)
    } else {
        (y[5], y[6])
    };
    let next = VehicleState { x: y[0], y: y[1], psi: wrap_angle(y[4]), v, delta, beta, omega, s: state.s };
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("vehicle state after step from {state:?}")));
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_at_constant_speed() {
        let p = VehicleConfig::default();
        let mut st = VehicleState { v: 2.0, psi: 0.3, ..Default::default() };
        for _ in 0..100 {
            st = step_dynamics(&st, ControlInput::new(0.0, 2.0), 0.01, &p).unwrap();
        }
        let along = st.x * 0.3f64.cos() + st.y * 0.3f64.sin();
        assert!((along - 2.0).abs() < 1e-3, "{along}");
        assert!((st.psi - 0.3).abs() < 1e-12);
    }

    #[test]
    fn standstill_stays_put() {
        let p = VehicleConfig::default();
        let mut st = VehicleState::at_rest(1.0, 2.0, 0.5);
        for _ in 0..50 {
            st = step_dynamics(&st, ControlInput::new(0.4, 0.0), 0.01, &p).unwrap();
        }
        assert_eq!((st.x, st.y), (1.0, 2.0));
        assert!((st.delta - 0.4).abs() < 1e-12);
    }

    #[test]
    fn low_speed_circle_radius() {
        let p = VehicleConfig::default();
        let delta = 0.25;
        let v = 0.3;
        let mut st = VehicleState { v, delta, ..Default::default() };
        let l = p.wheelbase();
        let r_kin = l / delta.tan();
        let circumference = 2.0 * std::f64::consts::PI * r_kin;
        let steps = (circumference / v / 0.01).ceil() as usize;
        let mut pts = Vec::with_capacity(steps);
        for _ in 0..steps {
            st = step_dynamics(&st, ControlInput::new(delta, v), 0.01, &p).unwrap();
            pts.push([st.x, st.y]);
        }
        // Least-squares circle fit (Kasa) as the measured radius.
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |a, q| (a.0 + q[0] / n, a.1 + q[1] / n));
        let (mut suu, mut svv, mut suv, mut suuu, mut svvv, mut suvv, mut svuu) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for q in &pts {
            let (u, w) = (q[0] - mx, q[1] - my);
            suu += u * u;
            svv += w * w;
            suv += u * w;
            suuu += u * u * u;
            svvv += w * w * w;
            suvv += u * w * w;
            svuu += w * u * u;
        }
        let rhs1 = 0.5 * (suuu + suvv);
        let rhs2 = 0.5 * (svvv + svuu);
        let det = suu * svv - suv * suv;
        let uc = (rhs1 * svv - rhs2 * suv) / det;
        let vc = (suu * rhs2 - suv * rhs1) / det;
        let r = (uc * uc + vc * vc + (suu + svv) / n).sqrt();
        assert!((r - r_kin).abs() / r_kin < 0.02, "{r} vs {r_kin}");
    }

    #[test]
    fn kinematic_fallback_is_the_definition() {
        let p = VehicleConfig::default();
        let st = VehicleState { v: 0.3, delta: 0.1, psi: 1.0, ..Default::default() };
        let u = ControlInput::new(0.2, 0.4);
        let a = step_dynamics(&st, u, 0.01, &p).unwrap();
        let sv = steering_rate(&p, st.delta, u.delta_des, 0.01);
        let acc = acceleration(&p, st.v, u.v_des);
        let y = rk4(&[st.x, st.y, st.delta, st.v, st.psi, st.omega, st.beta], 0.01, |y| kinematic_rhs(&p, y, acc, sv));
        assert_eq!((a.x, a.y, a.v, a.delta), (y[0], y[1], y[3], y[2]));
    }

    #[test]
    fn deterministic_bitwise() {
        let p = VehicleConfig::default();
        let run = || {
            let mut st = VehicleState { v: 1.0, ..Default::default() };
            for k in 0..500 {
                let u = ControlInput::new(0.3 * (k as f64 * 0.01).sin(), 6.0);
                st = step_dynamics(&st, u, 0.01, &p).unwrap();
            }
            st
        };
        let a = run();
        let b = run();
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.omega.to_bits(), b.omega.to_bits());
    }

    #[test]
    fn limits_hold() {
        let p = VehicleConfig::default();
        let mut st = VehicleState { v: 1.0, ..Default::default() };
        for _ in 0..300 {
            st = step_dynamics(&st, ControlInput::new(3.0, 100.0), 0.01, &p).unwrap();
            assert!(st.delta.abs() <= p.steer_max && st.v <= p.v_max && st.v >= 0.0);
            assert!(st.psi > -std::f64::consts::PI && st.psi <= std::f64::consts::PI);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let p = VehicleConfig::default();
        let st = VehicleState { x: f64::NAN, ..Default::default() };
        assert!(step_dynamics(&st, ControlInput::stop(), 0.01, &p).is_err());
    }
}
