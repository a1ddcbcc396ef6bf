//! C ABI over the core library: opaque handles, status codes, and flat
//! buffers. The generated header lives at `include/wpbr.h`.
//!
//! Ownership rules: every `*_new`/`*_generate` constructor hands the caller
//! an owned pointer that must be released with the matching `*_free`; all
//! other functions borrow. All functions are panic-safe: a caught panic
//! reports `WPBR_STATUS_INTERNAL` instead of unwinding across the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;

use wpbr_core::channel::{cophase_passive, enhance_channels, ChannelRealization, RelayConfig};
use wpbr_core::env::Env;
use wpbr_core::error::Error;
use wpbr_core::harness::{run_baseline, ExperimentConfig, Scheme};
use wpbr_core::phy::{power_budget, throughput, HybridAction, T_MIN};
use wpbr_core::polyblock::realize_action;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpbrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    NumericalError = 4,
    ConstraintViolation = 5,
    IoError = 6,
    Internal = 7,
}

/// Opaque experiment context: topology, path loss, link budget, solver
/// settings.
pub struct WpbrSystem {
    config: ExperimentConfig,
}

/// Opaque fading block for one system.
pub struct WpbrChannels {
    channels: ChannelRealization,
    seed: u64,
}

/// Lower-bound solution summary.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WpbrLowerBound {
    /// Best realized bound value `t log2(1 + gamma_bar)`.
    pub value: f64,
    /// Hop time of the solution.
    pub t_opt: f64,
    /// Remaining `r_upper - r_lower` gap at termination.
    pub gap: f64,
    /// Polyblock iterations spent.
    pub iterations: u32,
    /// 1 when the gap closed below the configured tolerance.
    pub converged: i32,
    /// Throughput the solution action earns on this fading block.
    pub realized_reward: f64,
}

fn status_of(err: &Error) -> WpbrStatus {
    match err {
        Error::DimensionMismatch(_) | Error::OutOfDomain(_) | Error::DegenerateInput(_) => {
            WpbrStatus::InvalidArgument
        }
        Error::NotHermitian { .. } => WpbrStatus::InvalidArgument,
        Error::BudgetViolation { .. } => WpbrStatus::ConstraintViolation,
        Error::Solver(_) => WpbrStatus::NumericalError,
        Error::Config(_) => WpbrStatus::ConfigError,
        Error::Io { .. } => WpbrStatus::IoError,
    }
}

fn guarded<F: FnOnce() -> WpbrStatus>(f: F) -> WpbrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => WpbrStatus::Internal,
    }
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn wpbr_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(env!("CARGO_PKG_VERSION")).expect("static version"))
        .as_ptr()
}

/// Human-readable description of a status code (static storage).
#[no_mangle]
pub extern "C" fn wpbr_status_message(status: WpbrStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        WpbrStatus::Ok => b"ok\0",
        WpbrStatus::NullArgument => b"null argument\0",
        WpbrStatus::InvalidArgument => b"invalid argument\0",
        WpbrStatus::ConfigError => b"configuration error\0",
        WpbrStatus::NumericalError => b"numerical error\0",
        WpbrStatus::ConstraintViolation => b"constraint violation\0",
        WpbrStatus::IoError => b"i/o error\0",
        WpbrStatus::Internal => b"internal error\0",
    };
    msg.as_ptr() as *const c_char
}

/// Creates a system with the built-in default configuration.
///
/// # Safety
/// `out` must be a valid pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn wpbr_system_default(out: *mut *mut WpbrSystem) -> WpbrStatus {
    guarded(|| {
        if out.is_null() {
            return WpbrStatus::NullArgument;
        }
        let system = Box::new(WpbrSystem {
            config: ExperimentConfig::default(),
        });
        unsafe { *out = Box::into_raw(system) };
        WpbrStatus::Ok
    })
}

/// Creates a system from a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn wpbr_system_from_config(
    path: *const c_char,
    out: *mut *mut WpbrSystem,
) -> WpbrStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return WpbrStatus::NullArgument;
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => return WpbrStatus::InvalidArgument,
        };
        match ExperimentConfig::load(Path::new(path)) {
            Ok(config) => {
                unsafe { *out = Box::into_raw(Box::new(WpbrSystem { config })) };
                WpbrStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a system handle (`NULL` is a no-op).
///
/// # Safety
/// `system` must have come from a `wpbr_system_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn wpbr_system_free(system: *mut WpbrSystem) {
    if !system.is_null() {
        drop(unsafe { Box::from_raw(system) });
    }
}

/// Number of HAP antennas (K).
///
/// # Safety
/// `system` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wpbr_system_antennas(system: *const WpbrSystem) -> usize {
    if system.is_null() {
        return 0;
    }
    unsafe { &*system }.config.topology.antennas
}

/// Number of relays (N).
///
/// # Safety
/// `system` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wpbr_system_relays(system: *const WpbrSystem) -> usize {
    if system.is_null() {
        return 0;
    }
    unsafe { &*system }.config.topology.num_relays()
}

/// Draws one fading block for the system (deterministic per seed).
///
/// # Safety
/// `system` must be a live handle; `out` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn wpbr_channels_generate(
    system: *const WpbrSystem,
    seed: u64,
    out: *mut *mut WpbrChannels,
) -> WpbrStatus {
    guarded(|| {
        if system.is_null() || out.is_null() {
            return WpbrStatus::NullArgument;
        }
        let sys = unsafe { &*system };
        let channels = wpbr_core::channel::generate_channels(
            &sys.config.topology,
            &sys.config.path_loss,
            seed,
        );
        unsafe { *out = Box::into_raw(Box::new(WpbrChannels { channels, seed })) };
        WpbrStatus::Ok
    })
}

/// Releases a channels handle (`NULL` is a no-op).
///
/// # Safety
/// `channels` must have come from `wpbr_channels_generate`.
#[no_mangle]
pub unsafe extern "C" fn wpbr_channels_free(channels: *mut WpbrChannels) {
    if !channels.is_null() {
        drop(unsafe { Box::from_raw(channels) });
    }
}

struct ActionInputs {
    modes: Vec<bool>,
    phases: Vec<f64>,
    w0: Vec<Complex64>,
    w1: Vec<Complex64>,
}

/// # Safety
/// Buffer lengths are the caller's contract: `modes`/`phases` hold N
/// entries, `w0`/`w1` hold 2K doubles (re/im interleaved).
unsafe fn read_action(
    sys: &WpbrSystem,
    modes: *const u8,
    phases: *const f64,
    w0: *const f64,
    w1: *const f64,
) -> Option<ActionInputs> {
    if modes.is_null() || phases.is_null() || w0.is_null() || w1.is_null() {
        return None;
    }
    let k = sys.config.topology.antennas;
    let n = sys.config.topology.num_relays();
    let modes = unsafe { std::slice::from_raw_parts(modes, n) }
        .iter()
        .map(|&b| b != 0)
        .collect();
    let phases = unsafe { std::slice::from_raw_parts(phases, n) }.to_vec();
    let unpack = |p: *const f64| -> Vec<Complex64> {
        unsafe { std::slice::from_raw_parts(p, 2 * k) }
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    };
    Some(ActionInputs {
        modes,
        phases,
        w0: unpack(w0),
        w1: unpack(w1),
    })
}

/// Slot throughput `t log2(1 + gamma_1 + gamma_2)` for a fully specified
/// action. Active relays transmit at their harvested-energy budget.
///
/// # Safety
/// `modes`/`phases` must hold N entries, `w0`/`w1` 2K doubles (re/im
/// interleaved); all pointers must be valid; `out_reward` is written on
/// success.
#[no_mangle]
pub unsafe extern "C" fn wpbr_throughput(
    system: *const WpbrSystem,
    channels: *const WpbrChannels,
    modes: *const u8,
    phases: *const f64,
    t: f64,
    w0: *const f64,
    w1: *const f64,
    out_reward: *mut f64,
) -> WpbrStatus {
    guarded(|| {
        if system.is_null() || channels.is_null() || out_reward.is_null() {
            return WpbrStatus::NullArgument;
        }
        let sys = unsafe { &*system };
        let ch = unsafe { &*channels };
        let Some(inputs) = (unsafe { read_action(sys, modes, phases, w0, w1) }) else {
            return WpbrStatus::NullArgument;
        };
        let relay_cfg = RelayConfig {
            modes: inputs.modes.clone(),
            phases: inputs.phases.clone(),
            gamma_max: sys.config.link.reflection_magnitude,
        };
        let budget = sys.config.budget(sys.config.link.p_t_dbm);
        let result = enhance_channels(&ch.channels, &relay_cfg).and_then(|enh| {
            let mut powers = Vec::with_capacity(enh.num_active());
            for i in 0..enh.num_active() {
                powers.push(power_budget(&enh, &inputs.w0, t, &budget, i)?);
            }
            let action = HybridAction {
                t,
                w0: inputs.w0.clone(),
                w1: inputs.w1.clone(),
                modes: inputs.modes.clone(),
                phases: inputs.phases.clone(),
                relay_powers: powers,
            };
            throughput(&enh, &action, &budget)
        });
        match result {
            Ok(reward) => {
                unsafe { *out_reward = reward };
                WpbrStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Solves the throughput lower bound for a given relay-mode assignment
/// (passive phases are co-phased automatically).
///
/// # Safety
/// `modes` must hold N entries; all pointers must be valid; `out` is
/// written on success.
#[no_mangle]
pub unsafe extern "C" fn wpbr_lower_bound(
    system: *const WpbrSystem,
    channels: *const WpbrChannels,
    modes: *const u8,
    out: *mut WpbrLowerBound,
) -> WpbrStatus {
    guarded(|| {
        if system.is_null() || channels.is_null() || modes.is_null() || out.is_null() {
            return WpbrStatus::NullArgument;
        }
        let sys = unsafe { &*system };
        let ch = unsafe { &*channels };
        let n = sys.config.topology.num_relays();
        let modes: Vec<bool> = unsafe { std::slice::from_raw_parts(modes, n) }
            .iter()
            .map(|&b| b != 0)
            .collect();

        let result = (|| -> Result<WpbrLowerBound, Error> {
            let budget = sys.config.budget(sys.config.link.p_t_dbm);
            let gamma_max = sys.config.link.reflection_magnitude;
            let phases = if modes.iter().any(|&m| m) {
                cophase_passive(&ch.channels, &modes, gamma_max)?
            } else {
                vec![0.0; n]
            };
            let relay_cfg = RelayConfig {
                modes: modes.clone(),
                phases: phases.clone(),
                gamma_max,
            };
            let enh = enhance_channels(&ch.channels, &relay_cfg)?;
            let solver = sys.config.lb_solver();
            let res = solver.solve(&enh, &budget)?;
            let action = realize_action(
                &enh,
                &budget,
                &modes,
                &phases,
                res.t_opt.clamp(T_MIN, 0.5 - T_MIN),
                &res.w0_opt,
                &res.w1_opt,
            );
            let realized = throughput(&enh, &action, &budget)?;
            Ok(WpbrLowerBound {
                value: res.value,
                t_opt: res.t_opt,
                gap: res.gap,
                iterations: res.iterations as u32,
                converged: res.converged as i32,
                realized_reward: realized,
            })
        })();
        match result {
            Ok(lb) => {
                unsafe { *out = lb };
                WpbrStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Evaluates a named reference scheme (`random`, `max_dl`, `max_energy`,
/// `dl_only`, `lower_bound`) on the fading block.
///
/// # Safety
/// `scheme` must be a NUL-terminated string; all pointers must be valid;
/// `out_reward` is written on success.
#[no_mangle]
pub unsafe extern "C" fn wpbr_baseline(
    system: *const WpbrSystem,
    channels: *const WpbrChannels,
    scheme: *const c_char,
    out_reward: *mut f64,
) -> WpbrStatus {
    guarded(|| {
        if system.is_null() || channels.is_null() || scheme.is_null() || out_reward.is_null() {
            return WpbrStatus::NullArgument;
        }
        let sys = unsafe { &*system };
        let ch = unsafe { &*channels };
        let scheme: Scheme = match unsafe { CStr::from_ptr(scheme) }.to_str() {
            Ok(s) => match s.parse() {
                Ok(scheme) => scheme,
                Err(e) => return status_of(&e),
            },
            Err(_) => return WpbrStatus::InvalidArgument,
        };
        let result = (|| -> Result<f64, Error> {
            let mut env = Env::new(sys.config.default_env_config())?;
            env.reset(ch.seed);
            env.set_channels(ch.channels.clone())?;
            let solver = sys.config.lb_solver();
            Ok(run_baseline(scheme, &env, &solver, ch.seed)?.reward)
        })();
        match result {
            Ok(reward) => {
                unsafe { *out_reward = reward };
                WpbrStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
