use std::ffi::{CStr, CString};
use std::ptr;

use pinnbasis_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pb_last_error()) }.to_string_lossy().into_owned()
}

fn new_network(dims: &[usize], seed: u64) -> *mut PbNetwork {
    let mut net = ptr::null_mut();
    let status = unsafe { pb_network_new(dims.as_ptr(), dims.len(), seed, &mut net) };
    assert_eq!(status, PbStatus::Ok, "{}", last_error());
    net
}

fn interval() -> PbDomain {
    PbDomain { kind: PbDomainKind::Interval, ax: -1.0, bx: 1.0, ay: 0.0, by: 0.0 }
}

#[test]
fn network_lifecycle_and_evaluation() {
    let net = new_network(&[1, 6, 5, 1], 3);
    unsafe {
        assert_eq!(pb_network_input_dim(net), 1);
        assert_eq!(pb_network_n_features(net), 5);
        let x = [-0.5, 0.0, 0.5];
        let mut u = [0.0; 3];
        assert_eq!(pb_network_eval(net, x.as_ptr(), 3, u.as_mut_ptr()), PbStatus::Ok);
        let reference = pinnbasis::network::FeatureNetwork::new(&[1, 6, 5, 1], 3).unwrap();
        for (xi, ui) in x.iter().zip(u) {
            assert_eq!(ui, reference.forward(&[*xi]).unwrap());
        }

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("n.json").to_str().unwrap()).unwrap();
        assert_eq!(pb_network_save(net, path.as_ptr()), PbStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(pb_network_load(path.as_ptr(), &mut loaded), PbStatus::Ok);
        let mut v = [0.0; 3];
        assert_eq!(pb_network_eval(loaded, x.as_ptr(), 3, v.as_mut_ptr()), PbStatus::Ok);
        assert_eq!(u, v);
        pb_network_free(loaded);
        pb_network_free(net);
        pb_network_free(ptr::null_mut());
    }
}

#[test]
fn train_build_and_solve() {
    let net = new_network(&[1, 10, 10, 1], 1);
    let problem = CString::new("poisson_1d").unwrap();
    unsafe {
        let mut loss = f64::NAN;
        let status = pb_network_train(net, problem.as_ptr(), 50, 1e-3, 100, 0, 1, &mut loss);
        assert_eq!(status, PbStatus::Ok, "{}", last_error());
        assert!(loss.is_finite());

        let mut basis = ptr::null_mut();
        assert_eq!(pb_basis_build(net, interval(), 60, &mut basis), PbStatus::Ok, "{}", last_error());
        let r_max = pb_basis_r_max(basis);
        assert!(r_max >= 2 && r_max <= 11);

        let x = [0.1, 0.2];
        let mut q = vec![0.0; 2 * r_max];
        assert_eq!(pb_basis_eval(basis, x.as_ptr(), 2, r_max, q.as_mut_ptr()), PbStatus::Ok);
        assert!(q.iter().all(|v| v.is_finite()));

        let r = r_max - 1;
        let mut coeffs = vec![0.0; r + 1];
        let mut err = PbNorms::default();
        let mut res = PbNorms::default();
        let status = pb_poisson_solve(basis, problem.as_ptr(), r, 200.0, 120, coeffs.as_mut_ptr(), &mut err, &mut res);
        assert_eq!(status, PbStatus::Ok, "{}", last_error());
        assert!(err.l2.is_finite() && err.l2 < 1.0);
        assert!(res.l2.is_finite());
        // optional outputs may be null
        let status =
            pb_poisson_solve(basis, problem.as_ptr(), 0, 200.0, 120, coeffs.as_mut_ptr(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, PbStatus::Ok);
        pb_basis_free(basis);
        pb_network_free(net);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut net = ptr::null_mut();
        let bad = [1usize, 0, 1];
        assert_eq!(pb_network_new(bad.as_ptr(), 3, 0, &mut net), PbStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert!(net.is_null());

        assert_eq!(pb_network_new(ptr::null(), 3, 0, &mut net), PbStatus::NullPointer);
        assert_eq!(pb_network_eval(ptr::null(), ptr::null(), 0, ptr::null_mut()), PbStatus::NullPointer);

        let missing = CString::new("/nonexistent/net.json").unwrap();
        assert_eq!(pb_network_load(missing.as_ptr(), &mut net), PbStatus::Io);

        let net = new_network(&[1, 4, 1], 0);
        assert!(last_error().is_empty());
        let unknown = CString::new("poisson_9d").unwrap();
        assert_eq!(
            pb_network_train(net, unknown.as_ptr(), 1, 1e-3, 10, 0, 0, ptr::null_mut()),
            PbStatus::UnknownProblem
        );
        let heat = CString::new("heat_1d").unwrap();
        assert_eq!(pb_network_train(net, heat.as_ptr(), 1, 1e-3, 10, 0, 0, ptr::null_mut()), PbStatus::InvalidArgument);

        let mut basis = ptr::null_mut();
        let flipped = PbDomain { kind: PbDomainKind::Interval, ax: 1.0, bx: -1.0, ay: 0.0, by: 0.0 };
        assert_eq!(pb_basis_build(net, flipped, 20, &mut basis), PbStatus::InvalidArgument);
        assert_eq!(pb_basis_build(net, interval(), 20, &mut basis), PbStatus::Ok);

        let square = CString::new("poisson_square").unwrap();
        let mut c = [0.0; 2];
        let status = pb_poisson_solve(basis, square.as_ptr(), 1, 200.0, 40, c.as_mut_ptr(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, PbStatus::InvalidArgument);
        let p1 = CString::new("poisson_1d").unwrap();
        let status = pb_poisson_solve(basis, p1.as_ptr(), 99, 200.0, 40, c.as_mut_ptr(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, PbStatus::InvalidArgument);
        assert!(last_error().contains("rank"));
        pb_basis_free(basis);
        pb_network_free(net);
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(pb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pinnbasis.h")).unwrap();
    for symbol in [
        "typedef struct PbNetwork PbNetwork;",
        "typedef struct PbBasis PbBasis;",
        "PB_STATUS_NULL_POINTER",
        "pb_network_new",
        "pb_network_train",
        "pb_basis_build",
        "pb_poisson_solve",
        "pb_last_error",
    ] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
}

/// Compiles and runs a C program against the generated header and the
/// static library.
#[test]
fn c_program_links_against_the_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libpinnbasis_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("r="));
}
