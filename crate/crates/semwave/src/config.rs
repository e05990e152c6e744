//! Run configuration: a TOML file describing the tank, the discretization,
//! the wave, the zones and the outputs. Parsing is strict (unknown keys are
//! rejected) and validation failures name the offending key.
//!
//! `elements` and `order` may be given as lists; the convergence pipeline
//! expands the cross product into individual cases, while a plain run
//! insists on scalars.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

fn default_layers() -> usize {
    4
}
fn default_layers_list() -> OneOrMany {
    OneOrMany::One(default_layers())
}
fn default_gravity() -> f64 {
    9.82
}
fn default_ramp_periods() -> f64 {
    5.0
}
fn default_cfl() -> f64 {
    0.95
}
fn default_alpha() -> f64 {
    // -ln(machine epsilon): full damping of the top mode.
    36.043653389117154
}
fn default_exponent() -> f64 {
    2.0
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_filter_fields() -> Vec<FilterField> {
    vec![FilterField::Eta, FilterField::Phi]
}
fn default_laplace_rtol() -> f64 {
    crate::solver::LAPLACE_RTOL
}
fn default_laplace_atol() -> f64 {
    crate::solver::LAPLACE_ATOL
}
fn default_mass_rtol() -> f64 {
    crate::solver::MASS_RTOL
}
fn default_mass_atol() -> f64 {
    crate::solver::MASS_ATOL
}
fn default_max_iter() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    fn single(&self, key: &str) -> Result<usize> {
        match self {
            OneOrMany::One(v) => Ok(*v),
            OneOrMany::Many(v) if v.len() == 1 => Ok(v[0]),
            OneOrMany::Many(_) => Err(Error::Config(format!(
                "{key} lists several values; this command needs exactly one"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveMode {
    /// Linearized free-surface conditions on the rest geometry.
    Lpf,
    /// Fully nonlinear free-surface conditions on the moving geometry.
    Fnpf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpacingChoice {
    #[default]
    Uniform,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeshUpdatePolicy {
    /// Reposition the mesh in every Runge-Kutta stage.
    #[default]
    Stage,
    /// Reposition once per step and reuse the operators across stages.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FilterCadence {
    #[default]
    Step,
    Stage,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterField {
    Eta,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Still water; waves enter through the generation zone.
    #[default]
    Rest,
    /// The wave solution sampled over the whole domain at t = 0.
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerChoice {
    #[default]
    Jacobi,
    Sgs,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub length: f64,
    /// Flat depth; mutually exclusive with `bathymetry`.
    #[serde(default)]
    pub depth: Option<f64>,
    /// Piecewise-linear depth profile as [x, depth] pairs with increasing x.
    #[serde(default)]
    pub bathymetry: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub elements: OneOrMany,
    /// Vertical element count; a list pairs entry-by-entry with the
    /// `elements` list (uniform refinement).
    #[serde(default = "default_layers_list")]
    pub layers: OneOrMany,
    pub order: OneOrMany,
    #[serde(default)]
    pub spacing: SpacingChoice,
    /// Override for the polynomial degree the nonlinear surface quadrature
    /// integrates exactly (default 3 * order).
    #[serde(default)]
    pub over_integration: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    pub mode: WaveMode,
    #[serde(default)]
    pub kh: Option<f64>,
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default)]
    pub wavelength: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    /// Height as a fraction of the limiting steepness at this depth.
    #[serde(default)]
    pub steepness_ratio: Option<f64>,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ZonesSection {
    /// [x_start, x_end] of the wave generation zone.
    #[serde(default)]
    pub generation: Option<[f64; 2]>,
    /// [x_start, x_end] of the absorption zone.
    #[serde(default)]
    pub absorption: Option<[f64; 2]>,
    #[serde(default = "default_ramp_periods")]
    pub ramp_periods: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Simulated duration in wave periods.
    pub periods: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Velocity scale override for the step-size rule.
    #[serde(default)]
    pub u_max: Option<f64>,
    #[serde(default)]
    pub mesh_update: MeshUpdatePolicy,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// Last untouched mode (defaults to order - 1).
    pub cutoff: Option<usize>,
    pub alpha: f64,
    pub exponent: f64,
    pub cadence: FilterCadence,
    pub fields: Vec<FilterField>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            cutoff: None,
            alpha: default_alpha(),
            exponent: default_exponent(),
            cadence: FilterCadence::default(),
            fields: default_filter_fields(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProbesSection {
    #[serde(default)]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Volume snapshot interval in steps; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_out_dir(), snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub laplace_rtol: f64,
    pub laplace_atol: f64,
    pub mass_rtol: f64,
    pub mass_atol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerChoice,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            laplace_rtol: default_laplace_rtol(),
            laplace_atol: default_laplace_atol(),
            mass_rtol: default_mass_rtol(),
            mass_atol: default_mass_atol(),
            max_iter: default_max_iter(),
            preconditioner: PreconditionerChoice::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub domain: DomainSection,
    pub discretization: DiscretizationSection,
    pub wave: WaveSection,
    #[serde(default)]
    pub zones: Option<ZonesSection>,
    pub time: TimeSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub probes: ProbesSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: Option<InitialState>,
}

/// How the wavelength scale of the wave is pinned down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveLengthInput {
    RelativeDepth(f64),
    Period(f64),
    Wavelength(f64),
}

/// How the wave height is pinned down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveHeightInput {
    Height(f64),
    SteepnessRatio(f64),
}

/// Depth as a function of x: flat or piecewise linear with flat extension
/// beyond the profile ends.
#[derive(Debug, Clone)]
pub enum DepthProfile {
    Flat(f64),
    Profile(Vec<[f64; 2]>),
}

impl DepthProfile {
    pub fn depth_at(&self, x: f64) -> f64 {
        match self {
            DepthProfile::Flat(h) => *h,
            DepthProfile::Profile(pts) => {
                if x <= pts[0][0] {
                    return pts[0][1];
                }
                if x >= pts[pts.len() - 1][0] {
                    return pts[pts.len() - 1][1];
                }
                for w in pts.windows(2) {
                    if x <= w[1][0] {
                        let t = (x - w[0][0]) / (w[1][0] - w[0][0]);
                        return w[0][1] + t * (w[1][1] - w[0][1]);
                    }
                }
                unreachable!()
            }
        }
    }
}

/// One fully validated, scalar simulation case.
#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub length: f64,
    pub depth: DepthProfile,
    pub periodic: bool,
    pub elements: usize,
    pub layers: usize,
    pub order: usize,
    pub spacing: SpacingChoice,
    pub over_integration: Option<usize>,
    pub mode: WaveMode,
    pub wave_length_input: WaveLengthInput,
    pub wave_height_input: WaveHeightInput,
    pub gravity: f64,
    pub generation_zone: Option<(f64, f64)>,
    pub absorption_zone: Option<(f64, f64)>,
    pub ramp_periods: f64,
    pub periods: f64,
    pub cfl: f64,
    pub u_max: Option<f64>,
    pub mesh_update: MeshUpdatePolicy,
    pub filter: FilterSection,
    pub probes: Vec<f64>,
    pub out_dir: String,
    pub snapshot_every: usize,
    pub solver: SolverSection,
    pub initial: InitialState,
}

impl FileConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Validate into a single case; list-valued discretization keys are an
    /// error here.
    pub fn single_case(&self) -> Result<CaseConfig> {
        let elements = self.discretization.elements.single("discretization.elements")?;
        let order = self.discretization.order.single("discretization.order")?;
        let layers = self.discretization.layers.single("discretization.layers")?;
        self.build_case(elements, order, layers)
    }

    /// Expand `elements` x `order` for sweeps, in file order. A `layers`
    /// list refines in lockstep with `elements` and must match its length.
    pub fn sweep_cases(&self) -> Result<Vec<CaseConfig>> {
        let elements = self.discretization.elements.values();
        let layers = match &self.discretization.layers {
            OneOrMany::One(v) => vec![*v; elements.len()],
            OneOrMany::Many(v) if v.len() == elements.len() => v.clone(),
            OneOrMany::Many(v) => {
                return Err(Error::Config(format!(
                    "discretization.layers lists {} values but elements lists {}; \
                     the two refine together",
                    v.len(),
                    elements.len()
                )))
            }
        };
        let mut cases = Vec::new();
        for &order in &self.discretization.order.values() {
            for (&elements, &layers) in elements.iter().zip(&layers) {
                cases.push(self.build_case(elements, order, layers)?);
            }
        }
        Ok(cases)
    }

    fn build_case(&self, elements: usize, order: usize, layers: usize) -> Result<CaseConfig> {
        let d = &self.domain;
        if !(d.length > 0.0) || !d.length.is_finite() {
            return Err(Error::Config("domain.length must be positive".into()));
        }
        let depth = match (&d.depth, &d.bathymetry) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "domain.depth and domain.bathymetry are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of domain.depth or domain.bathymetry is required".into(),
                ))
            }
            (Some(h), None) => {
                if !(*h > 0.0) || !h.is_finite() {
                    return Err(Error::Config("domain.depth must be positive".into()));
                }
                DepthProfile::Flat(*h)
            }
            (None, Some(pts)) => {
                if pts.len() < 2 {
                    return Err(Error::Config(
                        "domain.bathymetry needs at least two [x, depth] points".into(),
                    ));
                }
                for w in pts.windows(2) {
                    if w[1][0] <= w[0][0] {
                        return Err(Error::Config(
                            "domain.bathymetry x-coordinates must increase".into(),
                        ));
                    }
                }
                if pts.iter().any(|p| !(p[1] > 0.0) || !p[1].is_finite()) {
                    return Err(Error::Config(
                        "domain.bathymetry depths must be positive".into(),
                    ));
                }
                DepthProfile::Profile(pts.clone())
            }
        };

        if elements == 0 {
            return Err(Error::Config("discretization.elements must be at least 1".into()));
        }
        if order == 0 || order > 16 {
            return Err(Error::Config("discretization.order must be in 1..=16".into()));
        }
        if layers == 0 {
            return Err(Error::Config("discretization.layers must be at least 1".into()));
        }

        let w = &self.wave;
        let wave_length_input = match (w.kh, w.period, w.wavelength) {
            (Some(kh), None, None) => {
                if !(kh > 0.0) {
                    return Err(Error::Config("wave.kh must be positive".into()));
                }
                WaveLengthInput::RelativeDepth(kh)
            }
            (None, Some(t), None) => {
                if !(t > 0.0) {
                    return Err(Error::Config("wave.period must be positive".into()));
                }
                WaveLengthInput::Period(t)
            }
            (None, None, Some(l)) => {
                if !(l > 0.0) {
                    return Err(Error::Config("wave.wavelength must be positive".into()));
                }
                WaveLengthInput::Wavelength(l)
            }
            _ => {
                return Err(Error::Config(
                    "exactly one of wave.kh, wave.period, wave.wavelength is required".into(),
                ))
            }
        };
        let wave_height_input = match (w.height, w.steepness_ratio) {
            (Some(h), None) => {
                if !(h > 0.0) {
                    return Err(Error::Config("wave.height must be positive".into()));
                }
                WaveHeightInput::Height(h)
            }
            (None, Some(r)) => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::Config(
                        "wave.steepness_ratio must sit strictly between 0 and 1".into(),
                    ));
                }
                WaveHeightInput::SteepnessRatio(r)
            }
            _ => {
                return Err(Error::Config(
                    "exactly one of wave.height, wave.steepness_ratio is required".into(),
                ))
            }
        };
        if !(w.gravity > 0.0) || !w.gravity.is_finite() {
            return Err(Error::Config("wave.gravity must be positive".into()));
        }

        let (generation_zone, absorption_zone, ramp_periods) = match &self.zones {
            None => (None, None, default_ramp_periods()),
            Some(z) => {
                let check = |name: &str, iv: &Option<[f64; 2]>| -> Result<Option<(f64, f64)>> {
                    match iv {
                        None => Ok(None),
                        Some([a, b]) => {
                            if !(a < b) || *a < 0.0 || *b > d.length {
                                return Err(Error::Config(format!(
                                    "zones.{name} must be an increasing interval inside the domain"
                                )));
                            }
                            Ok(Some((*a, *b)))
                        }
                    }
                };
                if !(z.ramp_periods >= 0.0) {
                    return Err(Error::Config("zones.ramp_periods must be nonnegative".into()));
                }
                (
                    check("generation", &z.generation)?,
                    check("absorption", &z.absorption)?,
                    z.ramp_periods,
                )
            }
        };
        if let (Some(g), Some(a)) = (generation_zone, absorption_zone) {
            if g.1 > a.0 && a.1 > g.0 {
                return Err(Error::Config(
                    "zones.generation and zones.absorption must not overlap".into(),
                ));
            }
        }
        if self.domain.periodic && (generation_zone.is_some() || absorption_zone.is_some()) {
            return Err(Error::Config(
                "relaxation zones require a non-periodic domain".into(),
            ));
        }

        let t = &self.time;
        if !(t.periods > 0.0) {
            return Err(Error::Config("time.periods must be positive".into()));
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            return Err(Error::Config("time.cfl must sit in (0, 1]".into()));
        }
        if let Some(u) = t.u_max {
            if !(u > 0.0) {
                return Err(Error::Config("time.u_max must be positive".into()));
            }
        }

        if let Some(c) = self.filter.cutoff {
            if c > order {
                return Err(Error::Config(format!(
                    "filter.cutoff {c} exceeds the basis order {order}"
                )));
            }
        }
        if !(self.filter.alpha > 0.0) || !(self.filter.exponent > 0.0) {
            return Err(Error::Config(
                "filter.alpha and filter.exponent must be positive".into(),
            ));
        }

        for &x in &self.probes.x {
            if !(0.0..=d.length).contains(&x) {
                return Err(Error::Config(format!(
                    "probes.x value {x} lies outside the domain"
                )));
            }
        }

        let s = &self.solver;
        if !(s.laplace_rtol > 0.0 && s.mass_rtol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if s.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }

        let initial = self.initial.unwrap_or({
            if self.domain.periodic {
                InitialState::Wave
            } else {
                InitialState::Rest
            }
        });

        Ok(CaseConfig {
            length: d.length,
            depth,
            periodic: d.periodic,
            elements,
            layers,
            order,
            spacing: self.discretization.spacing,
            over_integration: self.discretization.over_integration,
            mode: w.mode,
            wave_length_input,
            wave_height_input,
            gravity: w.gravity,
            generation_zone,
            absorption_zone,
            ramp_periods,
            periods: t.periods,
            cfl: t.cfl,
            u_max: t.u_max,
            mesh_update: t.mesh_update,
            filter: self.filter.clone(),
            probes: self.probes.x.clone(),
            out_dir: self.output.dir.clone(),
            snapshot_every: self.output.snapshot_every,
            solver: s.clone(),
            initial,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [domain]
        length = 10.0
        depth = 0.5

        [discretization]
        elements = 20
        order = 4

        [wave]
        mode = "fnpf"
        kh = 1.0
        height = 0.02

        [time]
        periods = 5.0
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let fc = FileConfig::from_toml_str(MINIMAL).unwrap();
        let case = fc.single_case().unwrap();
        assert_eq!(case.elements, 20);
        assert_eq!(case.layers, 4);
        assert_eq!(case.order, 4);
        assert_eq!(case.gravity, 9.82);
        assert_eq!(case.cfl, 0.95);
        assert_eq!(case.ramp_periods, 5.0);
        assert_eq!(case.mesh_update, MeshUpdatePolicy::Stage);
        assert_eq!(case.filter.cadence, FilterCadence::Step);
        assert_eq!(case.filter.fields, vec![FilterField::Eta, FilterField::Phi]);
        assert_eq!(case.filter.alpha, 36.043653389117154);
        assert_eq!(case.initial, InitialState::Rest);
        assert_eq!(case.out_dir, "out");
        assert!(matches!(case.depth, DepthProfile::Flat(h) if h == 0.5));
        assert!(matches!(case.wave_length_input, WaveLengthInput::RelativeDepth(r) if r == 1.0));
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = MINIMAL.replace("periods = 5.0", "periods = 5.0\nstep_count = 3");
        let err = FileConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("step_count"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn wave_inputs_are_mutually_exclusive() {
        let text = MINIMAL.replace("kh = 1.0", "kh = 1.0\nperiod = 2.0");
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("wave.kh"), "{err}");

        let text = MINIMAL.replace("height = 0.02", "height = 0.02\nsteepness_ratio = 0.5");
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("wave.height"), "{err}");
    }

    #[test]
    fn depth_and_bathymetry_are_mutually_exclusive() {
        let text = MINIMAL.replace(
            "depth = 0.5",
            "depth = 0.5\nbathymetry = [[0.0, 0.5], [10.0, 0.2]]",
        );
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn bathymetry_must_increase_and_stay_wet() {
        let text = MINIMAL.replace("depth = 0.5", "bathymetry = [[5.0, 0.5], [2.0, 0.3]]");
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("increase"), "{err}");

        let text = MINIMAL.replace("depth = 0.5", "bathymetry = [[0.0, 0.5], [8.0, -0.1]]");
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn depth_profile_interpolates_linearly_with_flat_ends() {
        let p = DepthProfile::Profile(vec![[2.0, 0.4], [6.0, 0.1], [8.0, 0.3]]);
        assert_eq!(p.depth_at(0.0), 0.4);
        assert_eq!(p.depth_at(2.0), 0.4);
        assert!((p.depth_at(4.0) - 0.25).abs() < 1e-15);
        assert!((p.depth_at(7.0) - 0.2).abs() < 1e-15);
        assert_eq!(p.depth_at(9.5), 0.3);
    }

    #[test]
    fn zone_validation() {
        let add = "\n[zones]\ngeneration = [0.0, 2.0]\nabsorption = [1.5, 6.0]\n";
        let err = FileConfig::from_toml_str(&(MINIMAL.to_owned() + add))
            .unwrap()
            .single_case()
            .unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");

        let add = "\n[zones]\ngeneration = [4.0, 2.0]\n";
        let err = FileConfig::from_toml_str(&(MINIMAL.to_owned() + add))
            .unwrap()
            .single_case()
            .unwrap_err();
        assert!(err.to_string().contains("zones.generation"), "{err}");

        let add = "\n[zones]\nabsorption = [8.0, 12.0]\n";
        let err = FileConfig::from_toml_str(&(MINIMAL.to_owned() + add))
            .unwrap()
            .single_case()
            .unwrap_err();
        assert!(err.to_string().contains("zones.absorption"), "{err}");
    }

    #[test]
    fn periodic_domain_rejects_zones_and_defaults_to_wave_start() {
        let text = MINIMAL.replace("depth = 0.5", "depth = 0.5\nperiodic = true");
        let case = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap();
        assert_eq!(case.initial, InitialState::Wave);

        let with_zone = text + "\n[zones]\ngeneration = [0.0, 2.0]\n";
        let err = FileConfig::from_toml_str(&with_zone)
            .unwrap()
            .single_case()
            .unwrap_err();
        assert!(err.to_string().contains("periodic"), "{err}");
    }

    #[test]
    fn sweep_expansion_is_cross_product_in_file_order() {
        let text = MINIMAL
            .replace("elements = 20", "elements = [8, 16]")
            .replace("order = 4", "order = [2, 3]");
        let fc = FileConfig::from_toml_str(&text).unwrap();
        let cases = fc.sweep_cases().unwrap();
        let pairs: Vec<(usize, usize)> =
            cases.iter().map(|c| (c.order, c.elements)).collect();
        assert_eq!(pairs, vec![(2, 8), (2, 16), (3, 8), (3, 16)]);
        // A plain run refuses the sweep, naming the key.
        let err = fc.single_case().unwrap_err();
        assert!(err.to_string().contains("discretization.elements"), "{err}");
    }

    #[test]
    fn layers_list_refines_in_lockstep_with_elements() {
        let text = MINIMAL
            .replace("elements = 20", "elements = [8, 16]\nlayers = [2, 4]")
            .replace("order = 4", "order = [2, 3]");
        let fc = FileConfig::from_toml_str(&text).unwrap();
        let triples: Vec<(usize, usize, usize)> = fc
            .sweep_cases()
            .unwrap()
            .iter()
            .map(|c| (c.order, c.elements, c.layers))
            .collect();
        assert_eq!(triples, vec![(2, 8, 2), (2, 16, 4), (3, 8, 2), (3, 16, 4)]);

        let bad = MINIMAL.replace("elements = 20", "elements = [8, 16]\nlayers = [2, 4, 8]");
        let err = FileConfig::from_toml_str(&bad).unwrap().sweep_cases().unwrap_err();
        assert!(err.to_string().contains("refine together"), "{err}");
    }

    #[test]
    fn probe_positions_must_lie_inside_the_domain() {
        let text = MINIMAL.to_owned() + "\n[probes]\nx = [3.0, 11.0]\n";
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("probes.x"), "{err}");
    }

    #[test]
    fn solver_and_filter_overrides_parse() {
        let text = MINIMAL.to_owned()
            + r#"
            [filter]
            cutoff = 2
            cadence = "stage"
            fields = ["eta"]

            [solver]
            laplace_rtol = 1e-8
            preconditioner = "sgs"
        "#;
        let case = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap();
        assert_eq!(case.filter.cutoff, Some(2));
        assert_eq!(case.filter.cadence, FilterCadence::Stage);
        assert_eq!(case.filter.fields, vec![FilterField::Eta]);
        assert_eq!(case.solver.laplace_rtol, 1e-8);
        assert_eq!(case.solver.preconditioner, PreconditionerChoice::Sgs);
        assert_eq!(case.solver.mass_rtol, 1e-5);
    }

    #[test]
    fn filter_cutoff_above_order_is_rejected() {
        let text = MINIMAL.to_owned() + "\n[filter]\ncutoff = 9\n";
        let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
        assert!(err.to_string().contains("filter.cutoff"), "{err}");
    }

    #[test]
    fn bad_scalar_values_name_their_key() {
        for (from, to, key) in [
            ("length = 10.0", "length = -1.0", "domain.length"),
            ("periods = 5.0", "periods = 0.0", "time.periods"),
            ("elements = 20", "elements = 0", "discretization.elements"),
            ("height = 0.02", "height = 0.0", "wave.height"),
        ] {
            let text = MINIMAL.replace(from, to);
            let err = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap_err();
            assert!(err.to_string().contains(key), "{key}: {err}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn steepness_ratio_input_accepted() {
        let text = MINIMAL.replace("height = 0.02", "steepness_ratio = 0.5");
        let case = FileConfig::from_toml_str(&text).unwrap().single_case().unwrap();
        assert!(matches!(
            case.wave_height_input,
            WaveHeightInput::SteepnessRatio(r) if r == 0.5
        ));
    }
}
