use omniteleop_core::geom::{Diag6, Frame, Rotation, Vec3, Wrench};
use omniteleop_core::policy::ReferenceState;
use omniteleop_core::station::{station_step, OperatorCommand, StationLimits, StationParams, StationState};
use omniteleop_core::vehicle::{
    critical_damping, error_energy, impedance_step, tracking_errors, VehicleParams, VehicleState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DT: f64 = 1e-3;

fn random_vehicle(rng: &mut ChaCha8Rng, scale: f64) -> VehicleState {
    let mut v = || {
        Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    };
    let axis = v().normalize();
    VehicleState {
        position: v() * scale,
        velocity: v() * scale,
        orientation: Rotation::from_axis_angle(&axis, 1.2 * scale),
        rate: v() * scale,
    }
}

// Once the error decays to the rounding floor of the state, the energy
// jitters by a few ulps; only larger increases count.
fn increased(before: f64, after: f64) -> bool {
    after > before * (1.0 + 4.0 * f64::EPSILON)
}

fn no_limits() -> StationLimits {
    StationLimits {
        workspace_radius: f64::INFINITY,
        ..StationLimits::default()
    }
}

#[test]
fn energy_balance_per_step() {
    let params = VehicleParams::default();
    let reference = ReferenceState::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = random_vehicle(&mut rng, 0.3);
    let d = params.damping.0;
    for k in 0..20_000 {
        let t = k as f64 * DT;
        let w = Wrench::new(
            Vec3::new(3.0 * (1.3 * t).sin(), -2.0, 1.5 * (0.4 * t).cos()),
            Vec3::new(0.2 * (0.9 * t).sin(), 0.1, -0.3 * (2.1 * t).cos()),
            Frame::Body,
        );
        let next = impedance_step(&state, &reference, &w, &params, DT).unwrap();
        let e = tracking_errors(&next, &reference);
        let power = w.force.dot(&e.velocity) + w.torque.dot(&e.rate);
        let dissipation = e.velocity.component_mul(&e.velocity).dot(&Vec3::new(d[0], d[1], d[2]))
            + e.rate.component_mul(&e.rate).dot(&Vec3::new(d[3], d[4], d[5]));
        let e0 = error_energy(&state, &reference, &params);
        let e1 = error_energy(&next, &reference, &params);
        let residual = (e1 - e0) - DT * (power - dissipation);
        assert!(
            residual.abs() <= 1e-3 * e0.max(e1) + 1e-15,
            "tick {k}: residual {residual:e}, energy {e1:e}"
        );
        state = next;
    }
}

#[test]
fn unforced_vehicle_error_energy_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = VehicleParams::default();
    let reference = ReferenceState::at(Vec3::new(1.0, 2.0, 3.0), Rotation::from_axis_angle(&Vec3::y(), 0.4));
    let mut state = random_vehicle(&mut rng, 0.5);
    state.position += reference.position;
    state.orientation = reference.orientation.compose(&state.orientation);
    let zero = Wrench::zero(Frame::Body);
    let mut energy = error_energy(&state, &reference, &params);
    let mut violations = 0;
    for _ in 0..100_000 {
        state = impedance_step(&state, &reference, &zero, &params, DT).unwrap();
        let e = error_energy(&state, &reference, &params);
        if increased(energy, e) {
            violations += 1;
        }
        energy = e;
    }
    assert_eq!(violations, 0);
}

#[test]
fn unforced_regulation_from_random_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let reference = ReferenceState::default();
    let zero = Wrench::zero(Frame::Body);
    for _ in 0..10 {
        let inertia = Diag6::from_blocks(rng.random_range(1.0..8.0), rng.random_range(0.02..0.2));
        let stiffness = Diag6::from_blocks(rng.random_range(20.0..300.0), rng.random_range(1.0..20.0));
        let params = VehicleParams {
            inertia,
            stiffness,
            damping: critical_damping(&inertia, &stiffness, rng.random_range(0.5..1.5)),
            ..VehicleParams::default()
        };
        let mut state = random_vehicle(&mut rng, 1.0);
        let mut settled = None;
        for k in 0..20_000 {
            state = impedance_step(&state, &reference, &zero, &params, DT).unwrap();
            let e = tracking_errors(&state, &reference);
            if e.position.norm() < 1e-3 && e.attitude.norm() < 1e-3 {
                settled.get_or_insert(k);
            } else {
                settled = None;
            }
        }
        assert!(settled.is_some(), "{params:?}");
    }
}

#[test]
fn unforced_station_never_gains_energy() {
    let params = StationParams::default();
    let limits = StationLimits::default();
    let mut state = StationState::default();
    state.twist.linear = Vec3::new(0.4, -0.2, 0.1);
    state.twist.angular = Vec3::new(0.3, 0.5, -0.6);
    let idle = OperatorCommand::idle(0.0);
    let zero = Wrench::zero(Frame::Idle);
    let inertia = params.total_inertia();
    let mut energy = state.kinetic_energy(&inertia);
    let mut violations = 0;
    for _ in 0..100_000 {
        state = station_step(&state, &idle, &zero, &params, &limits, DT).unwrap().state;
        let e = state.kinetic_energy(&inertia);
        if increased(energy, e) {
            violations += 1;
        }
        energy = e;
    }
    assert_eq!(violations, 0);
}

#[test]
fn human_damping_slows_terminal_velocity() {
    let cmd = OperatorCommand::from_array([5.0, 0.0, 0.0, 0.0, 0.0, 0.5], 0.0);
    let zero = Wrench::zero(Frame::Idle);
    let terminal = |d_h: f64| {
        let params = StationParams {
            human_inertia: Diag6::from_blocks(1.0, 0.1),
            human_damping: Diag6::from_blocks(d_h, 0.1 * d_h),
            ..StationParams::default()
        };
        let mut s = StationState::default();
        for _ in 0..30_000 {
            s = station_step(&s, &cmd, &zero, &params, &no_limits(), DT).unwrap().state;
        }
        s.twist.linear.x
    };
    let speeds: Vec<f64> = [0.0, 1.0, 5.0, 20.0].iter().map(|&d| terminal(d)).collect();
    assert!(speeds.windows(2).all(|w| w[1] < w[0]), "{speeds:?}");
    assert!((speeds[0] - 1.0).abs() < 0.01);
}

#[test]
fn station_is_bit_deterministic() {
    let params = StationParams::default();
    let run = || {
        let mut s = StationState::default();
        let mut out = Vec::new();
        for k in 0..5000 {
            let t = k as f64 * DT;
            let cmd = OperatorCommand::from_array([(t * 3.0).sin(), 1.0, -0.5, 0.1, (t * 2.0).cos(), 0.0], t);
            let fb = Wrench::new(-s.pose.position * 50.0, Vec3::zeros(), Frame::Idle);
            s = station_step(&s, &cmd, &fb, &params, &StationLimits::default(), DT)
                .unwrap()
                .state;
            out.push(s);
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn station_without_human_matches_device_equation() {
    // With M_h = D_h = 0 the step is M_a·a + D_a·v = f_a + w_fb.
    let params = StationParams::default();
    let cmd = OperatorCommand::from_array([2.0, -1.0, 0.5, 0.2, 0.1, -0.3], 0.0);
    let fb = Wrench::from_array([-0.5, 0.0, 0.1, 0.0, 0.05, 0.0], Frame::Idle);
    let mut s = StationState::default();
    s.twist.linear = Vec3::new(0.1, 0.0, 0.0);
    let out = station_step(&s, &cmd, &fb, &params, &StationLimits::default(), DT).unwrap();
    let m = [10.0, 10.0, 10.0, 1.0, 1.0, 1.0];
    let d = [5.0, 5.0, 5.0, 1.0, 1.0, 1.0];
    let v = s.twist.to_array();
    let f = cmd.wrench.to_array();
    let w = fb.to_array();
    for i in 0..6 {
        let expected = (f[i] + w[i] - d[i] * v[i]) / m[i];
        assert!((out.accel[i] - expected).abs() < 1e-15);
    }
}
