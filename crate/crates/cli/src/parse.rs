//! Parsing of the small string specs accepted on the command line.

use nhpp_shrink::kernels::KernelKind;
use nhpp_shrink::{Atom, Beta, IntensityModel, KernelSpec, Window};

use crate::CliError;

/// `circle` or `a,b`.
pub fn parse_window(s: &str) -> Result<Window, CliError> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("circle") {
        return Ok(Window::Circle);
    }
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| CliError::Config(format!("window must be `circle` or `a,b`, got `{s}`")))?;
    let a = parse_f64("window start", a)?;
    let b = parse_f64("window end", b)?;
    Ok(Window::interval(a, b)?)
}

/// `improper`, or a positive number.
pub fn parse_beta(s: &str) -> Result<Beta, CliError> {
    match s.trim() {
        "improper" | "inf" | "infinity" => Ok(Beta::Improper),
        other => Ok(Beta::finite(parse_f64("beta", other)?)?),
    }
}

fn parse_f64(what: &str, s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{what}: `{s}` is not a number")))
}

/// Named intensities:
///
/// * `sine2`: `sin(u) + 2` on the circle
/// * `const:C`: constant `C` on the window
/// * `vm:KAPPA:U@M,U@M,…`: von Mises mixture on the circle
/// * `gauss:SIGMA:U@M,…`: Gaussian mixture on an interval window
pub fn parse_intensity(spec: &str, window: Window) -> Result<IntensityModel, CliError> {
    let spec = spec.trim();
    if spec == "sine2" {
        if !window.is_circle() {
            return Err(CliError::Config("`sine2` lives on the circle".into()));
        }
        return Ok(IntensityModel::sine2());
    }
    if let Some(c) = spec.strip_prefix("const:") {
        return Ok(IntensityModel::constant(window, parse_f64("constant intensity", c)?)?);
    }
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("unknown intensity `{spec}`")))?;
    let (param, atoms) = rest
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("mixture spec `{spec}` needs PARAM:U@M,…")))?;
    let param = parse_f64("kernel parameter", param)?;
    let kernel = match kind {
        "vm" => KernelSpec::new(KernelKind::VonMises { kappa: param }, window)?,
        "gauss" => KernelSpec::new(KernelKind::Gaussian { sigma: param }, window)?,
        _ => return Err(CliError::Config(format!("unknown intensity `{spec}`"))),
    };
    let atoms = atoms
        .split(',')
        .map(|a| {
            let (u, m) = a
                .split_once('@')
                .ok_or_else(|| CliError::Config(format!("atom `{a}` is not U@M")))?;
            Ok(Atom::new(parse_f64("atom location", u)?, parse_f64("atom weight", m)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(IntensityModel::mixture(kernel, atoms)?)
}

/// Von Mises with `kappa` on the circle, Gaussian with `sigma` on an interval.
pub fn kernel_for(window: Window, kappa: Option<f64>, sigma: Option<f64>) -> Result<KernelSpec, CliError> {
    match (window, kappa, sigma) {
        (Window::Circle, k, None) => Ok(KernelSpec::von_mises(k.unwrap_or(5.0))?),
        (Window::Interval { .. }, None, Some(s)) => Ok(KernelSpec::gaussian(s, window)?),
        (Window::Interval { .. }, None, None) => {
            Err(CliError::Config("an interval window needs --sigma for the Gaussian kernel".into()))
        }
        _ => Err(CliError::Config(
            "use --kappa on the circle and --sigma on an interval".into(),
        )),
    }
}
