use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use gail_lin_ffi::*;

fn last_error() -> String {
    let len = unsafe { gl_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; len + 1];
    unsafe { gl_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    buf.truncate(len);
    String::from_utf8(buf).unwrap()
}

fn reference() -> *mut GlInstance {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { gl_instance_reference(&mut inst) }, GlStatus::Ok);
    inst
}

#[test]
fn dims_of_tabular_instance() {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { gl_instance_tabular(3, 2, 5, 9, &mut inst) }, GlStatus::Ok);
    let (mut s, mut a, mut h, mut dp, mut dr) = (0, 0, 0, 0, 0);
    assert_eq!(unsafe { gl_instance_dims(inst, &mut s, &mut a, &mut h, &mut dp, &mut dr) }, GlStatus::Ok);
    assert_eq!((s, a, h, dp, dr), (3, 2, 5, 18, 6));
    assert_eq!(unsafe { gl_instance_dims(inst, ptr::null_mut(), ptr::null_mut(), &mut h, ptr::null_mut(), ptr::null_mut()) }, GlStatus::Ok);
    unsafe { gl_instance_free(inst) };
}

#[test]
fn invalid_arguments_map_to_codes() {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { gl_instance_tabular(0, 2, 3, 1, &mut inst) }, GlStatus::InvalidInput);
    assert!(inst.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { gl_instance_reference(ptr::null_mut()) }, GlStatus::NullPointer);
    assert!(last_error().contains("out"));

    let inst = reference();
    let mut opts = gl_ogap_options_default();
    opts.xi = 2.0;
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { gl_run_ogap(inst, &opts, &mut run) }, GlStatus::Config);
    assert!(run.is_null());
    assert!(last_error().contains("xi"), "{}", last_error());

    let missing = CString::new("/does/not/exist.json").unwrap();
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { gl_instance_load(missing.as_ptr(), &mut loaded) }, GlStatus::Io);

    let bad = [0xffu8, 0];
    assert_eq!(unsafe { gl_instance_load(bad.as_ptr() as *const c_char, &mut loaded) }, GlStatus::Utf8);
    unsafe { gl_instance_free(inst) };
}

#[test]
fn success_clears_the_error() {
    assert_eq!(unsafe { gl_instance_reference(ptr::null_mut()) }, GlStatus::NullPointer);
    let inst = reference();
    assert_eq!(last_error(), "");
    unsafe { gl_instance_free(inst) };
}

#[test]
fn truncated_error_message_is_terminated() {
    assert_eq!(unsafe { gl_instance_reference(ptr::null_mut()) }, GlStatus::NullPointer);
    let mut buf = [0x7fu8; 4];
    let full = unsafe { gl_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    assert!(full > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn policy_roundtrip_and_expert_return() {
    let inst = reference();
    let mut expert = ptr::null_mut();
    assert_eq!(unsafe { gl_instance_expert(inst, &mut expert) }, GlStatus::Ok);
    let mut p = 0.0;
    assert_eq!(unsafe { gl_policy_prob(expert, 0, 0, 0, &mut p) }, GlStatus::Ok);
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(unsafe { gl_policy_prob(expert, 9, 0, 0, &mut p) }, GlStatus::InvalidInput);

    let table = vec![1.0 / 3.0; 4 * 3 * 4];
    let mut uniform = ptr::null_mut();
    assert_eq!(unsafe { gl_policy_new(4, 3, 4, table.as_ptr(), &mut uniform) }, GlStatus::Ok);
    let (mut j_expert, mut j_uniform) = (0.0, 0.0);
    assert_eq!(unsafe { gl_policy_return(inst, expert, &mut j_expert) }, GlStatus::Ok);
    assert_eq!(unsafe { gl_policy_return(inst, uniform, &mut j_uniform) }, GlStatus::Ok);
    assert!(j_expert >= j_uniform - 1e-12);

    let bad = vec![0.5; 4 * 3 * 4];
    let mut rejected = ptr::null_mut();
    assert_eq!(unsafe { gl_policy_new(4, 3, 4, bad.as_ptr(), &mut rejected) }, GlStatus::InvalidInput);
    unsafe {
        gl_policy_free(expert);
        gl_policy_free(uniform);
        gl_instance_free(inst);
    }
}

fn ogap_run(inst: *const GlInstance, seed: u64) -> *mut GlRun {
    let mut opts = gl_ogap_options_default();
    opts.episodes = 30;
    opts.n1 = 100;
    opts.seed = seed;
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { gl_run_ogap(inst, &opts, &mut run) }, GlStatus::Ok, "{}", last_error());
    run
}

#[test]
fn ogap_run_is_reproducible() {
    let inst = reference();
    let (a, b) = (ogap_run(inst, 4), ogap_run(inst, 4));
    let (mut ra, mut rb, mut len) = (0.0, 0.0, 0);
    unsafe {
        assert_eq!(gl_run_len(a, &mut len), GlStatus::Ok);
        assert_eq!(gl_run_regret(inst, a, &mut ra), GlStatus::Ok);
        assert_eq!(gl_run_regret(inst, b, &mut rb), GlStatus::Ok);
    }
    assert_eq!(len, 30);
    assert!(ra >= 0.0 && ra.is_finite());
    assert_eq!(ra.to_bits(), rb.to_bits());

    let mut ir = 0.0;
    assert_eq!(unsafe { gl_run_intrinsic_uncertainty(inst, a, &mut ir) }, GlStatus::InvalidInput);

    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { gl_run_policy(a, 29, &mut policy) }, GlStatus::Ok);
    assert_eq!(unsafe { gl_run_policy(a, 30, &mut policy) }, GlStatus::InvalidInput);
    unsafe {
        gl_policy_free(policy);
        gl_run_free(a);
        gl_run_free(b);
        gl_instance_free(inst);
    }
}

#[test]
fn pgap_run_reports_gap_and_writes_artifacts() {
    let inst = reference();
    let mut opts = gl_pgap_options_default();
    opts.iterations = 20;
    opts.n1 = 100;
    opts.n2 = 200;
    opts.behavior = GlBehavior::Uniform;
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { gl_run_pgap(inst, &opts, &mut run) }, GlStatus::Ok, "{}", last_error());
    let (mut gap, mut iu) = (0.0, 0.0);
    assert_eq!(unsafe { gl_run_gap(inst, run, &mut gap) }, GlStatus::Ok);
    assert_eq!(unsafe { gl_run_intrinsic_uncertainty(inst, run, &mut iu) }, GlStatus::Ok);
    assert!(gap >= 0.0 && iu >= 0.0);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gl_run_write(run, path.as_ptr(), false) }, GlStatus::Ok);
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("episodes.csv").exists());
    unsafe {
        gl_run_free(run);
        gl_instance_free(inst);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        gl_instance_free(ptr::null_mut());
        gl_policy_free(ptr::null_mut());
        gl_run_free(ptr::null_mut());
    }
}

fn target_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_matches_exports() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gail_lin.h")).unwrap();
    for name in [
        "gl_last_error_message",
        "gl_instance_tabular",
        "gl_instance_free",
        "gl_run_ogap",
        "gl_run_pgap",
        "gl_run_free",
        "GL_STATUS_NULL_POINTER",
        "typedef struct GlRun GlRun;",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn c_program_links_against_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let lib_dir = target_dir();
    let lib = if cfg!(target_os = "macos") { "libgail_lin_ffi.dylib" } else { "libgail_lin_ffi.so" };
    assert!(lib_dir.join(lib).exists(), "{} missing", lib_dir.join(lib).display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lgail_lin_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).env("DYLD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok 20 "));
}
