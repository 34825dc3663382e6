use std::ffi::CStr;
use std::ptr;

use aircomp_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { aircomp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn static_round_trip() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(aircomp_system_new(2.0, [1.0, 1.0].as_ptr(), 2, &mut sys), AircompStatus::Ok);
        let mut powers = [0.0; 2];
        let (mut eta, mut k_star, mut obj) = (0.0, 0, 0.0);
        let status = aircomp_solve_static(sys, [1.0, 4.0].as_ptr(), 2, powers.as_mut_ptr(), &mut eta, &mut k_star, &mut obj);
        assert_eq!(status, AircompStatus::Ok);
        assert_eq!((k_star, powers), (2, [1.0, 1.0]));
        assert!((obj - 5.0 / 7.0).abs() < 1e-14);

        let mut mse = 0.0;
        assert_eq!(aircomp_mse_single_state(sys, [1.0, 4.0].as_ptr(), powers.as_ptr(), 2, eta, &mut mse), AircompStatus::Ok);
        assert!((mse - obj / 4.0).abs() < 1e-14);
        assert_eq!(aircomp_mse_single_state(sys, [1.0, 4.0].as_ptr(), [0.0, 0.0].as_ptr(), 2, f64::INFINITY, &mut mse), AircompStatus::Ok);
        assert_eq!(mse, 0.5);
        aircomp_system_free(sys);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(aircomp_system_new(0.0, [1.0].as_ptr(), 1, &mut sys), AircompStatus::InvalidArgument);
        assert!(sys.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(aircomp_system_new(1.0, ptr::null(), 1, &mut sys), AircompStatus::NullPointer);
        assert_eq!(last_error(), "budgets is null");

        assert_eq!(aircomp_system_new(1.0, [1.0].as_ptr(), 1, &mut sys), AircompStatus::Ok);
        assert_eq!(last_error(), "");
        let mut p = [0.0];
        let status = aircomp_solve_static(sys, [0.0].as_ptr(), 1, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, AircompStatus::DegenerateChannel);
        aircomp_system_free(sys);
        aircomp_system_free(ptr::null_mut());
        assert_eq!(aircomp_ensemble_len(ptr::null()), 0);
    }
}

#[test]
fn fading_two_state_example() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(aircomp_system_new(1.0, [0.2].as_ptr(), 1, &mut sys), AircompStatus::Ok);
        let mut ens = ptr::null_mut();
        assert_eq!(aircomp_ensemble_from_power_gains([1.0, 4.0].as_ptr(), [0.5, 0.5].as_ptr(), 2, 1, &mut ens), AircompStatus::Ok);
        let mut sol = ptr::null_mut();
        assert_eq!(aircomp_solve_fading(sys, ens, ptr::null(), &mut sol), AircompStatus::Ok);
        let mut summary = AircompFadingSummary::default();
        assert_eq!(aircomp_fading_summary(sol, &mut summary), AircompStatus::Ok);
        assert!(summary.converged && summary.gap.abs() < 1e-8);
        let (mut p, mut eta) = ([0.0], 0.0);
        assert_eq!(aircomp_fading_state_policy(sol, 0, p.as_mut_ptr(), 1, &mut eta), AircompStatus::Ok);
        assert!((p[0] - 0.1).abs() < 1e-6);
        assert_eq!(aircomp_fading_state_policy(sol, 2, p.as_mut_ptr(), 1, &mut eta), AircompStatus::InvalidArgument);
        assert_eq!(aircomp_fading_mu(sol, p.as_mut_ptr(), 2), AircompStatus::DimensionMismatch);

        let (mut mu, mut threshold, mut peak) = (0.0, 0.0, 0.0);
        assert_eq!(aircomp_solve_waterfilling(sys, ens, 0, &mut mu, &mut threshold, &mut peak), AircompStatus::Ok);
        assert!((mu - 100.0 / 121.0).abs() < 1e-8);
        assert!((peak - 2.0 * threshold).abs() < 1e-12);

        aircomp_fading_solution_free(sol);
        aircomp_ensemble_free(ens);
        aircomp_system_free(sys);
    }
}

#[test]
fn rayleigh_ensemble_and_low_complexity() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(aircomp_system_new(0.3, [1.0; 3].as_ptr(), 3, &mut sys), AircompStatus::Ok);
        let mut ens = ptr::null_mut();
        assert_eq!(aircomp_ensemble_rayleigh(3, 500, 1.0, 11, &mut ens), AircompStatus::Ok);
        assert_eq!(aircomp_ensemble_len(ens), 500);
        let mut gains = [0.0; 3];
        assert_eq!(aircomp_ensemble_power_gains(ens, 499, gains.as_mut_ptr(), 3), AircompStatus::Ok);
        assert!(gains.iter().all(|g| *g > 0.0));

        let mut opts = aircomp_fading_options_default();
        opts.method = AircompMethod::ProjectedNewton;
        let mut sol = ptr::null_mut();
        assert_eq!(aircomp_solve_fading(sys, ens, &opts, &mut sol), AircompStatus::Ok);
        let mut summary = AircompFadingSummary::default();
        aircomp_fading_summary(sol, &mut summary);

        let (mut eta, mut xi, mut mse) = (0.0, [0.0; 3], 0.0);
        assert_eq!(aircomp_solve_lowcomplexity(sys, ens, &mut eta, xi.as_mut_ptr(), 3, &mut mse), AircompStatus::Ok);
        assert!(mse >= summary.mse);

        aircomp_fading_solution_free(sol);
        aircomp_ensemble_free(ens);
        aircomp_system_free(sys);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(aircomp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
