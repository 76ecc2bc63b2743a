//! Builders for the master-equation generators of the five feedback loops:
//! simple (instantaneous) feedback, electro-optic feedback through a
//! two-level atom or a second cavity mode, all-optical (cascaded) feedback
//! through either ancilla, plus the dispersive Jaynes-Cummings realization
//! and a Kerr oscillator for comparison.
//!
//! The system is a degenerate parametric oscillator below or above its
//! no-feedback threshold: H = -(i lambda/4)(a^2 - a^dag 2), unit system
//! damping. The feedback phase operator is Z = chi a^dag a.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::fock;
use crate::operator::Operator;
use crate::space::SpaceSpec;
use crate::superop::SuperOp;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// System-side parameters shared by every scheme.
#[derive(Clone, Copy, Debug)]
pub struct SystemParams {
    /// Two-photon drive strength; the no-feedback oscillator loses its
    /// steady state at lambda = 1.
    pub lambda: f64,
    /// Feedback phase per photon.
    pub chi: f64,
    /// System Fock truncation (highest retained occupation).
    pub n_max: usize,
}

impl SystemParams {
    pub fn new(lambda: f64, chi: f64, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidParam(format!("n_max {n_max} below 2")));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidParam(format!("lambda {lambda} is negative")));
        }
        Ok(SystemParams { lambda, chi, n_max })
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn space(&self) -> SpaceSpec {
        SpaceSpec::fock(self.dim())
    }
}

/// Ancilla-side parameters. Which fields matter depends on the scheme;
/// the linked constructors encode the paper's parameter ties.
#[derive(Clone, Copy, Debug)]
pub struct AncillaParams {
    /// Ancilla damping rate (system damping is 1).
    pub gamma: f64,
    /// System-ancilla coupling rate.
    pub g: f64,
    /// Feedback drive amplitude (mode-feedback loop only).
    pub epsilon: f64,
    /// Fock truncation for mode ancillas.
    pub ancilla_dim: usize,
    /// Atom detuning (dispersive schemes only).
    pub detuning: f64,
}

impl AncillaParams {
    pub fn tla(gamma: f64, g: f64) -> Self {
        AncillaParams { gamma, g, epsilon: 0.0, ancilla_dim: 2, detuning: 0.0 }
    }

    pub fn tla_detuned(gamma: f64, g: f64, detuning: f64) -> Self {
        AncillaParams { detuning, ..Self::tla(gamma, g) }
    }

    pub fn mode(gamma: f64, g: f64, ancilla_dim: usize) -> Self {
        AncillaParams { gamma, g, epsilon: 0.0, ancilla_dim, detuning: 0.0 }
    }

    /// Electro-optic atom loop with the feedback phase tied to the coupling:
    /// chi = g/Gamma.
    pub fn eo_tla_linked(gamma: f64, chi: f64) -> Self {
        Self::tla(gamma, gamma * chi)
    }

    /// All-optical loop with chi = 4g/Gamma.
    pub fn ao_linked(gamma: f64, chi: f64, ancilla_dim: usize) -> Self {
        AncillaParams { gamma, g: gamma * chi / 4.0, epsilon: 0.0, ancilla_dim, detuning: 0.0 }
    }

    /// Electro-optic mode loop: chi = 2 eps·g/Gamma, with eps set by the
    /// residual phase-diffusion strength Gamma/(2 eps^2). The loop mode
    /// jumps by eps/2 per detection and its response decays at Gamma/2, so
    /// a detection leaves the phase kick 2 eps g/Gamma behind.
    pub fn eo_mode_linked(
        gamma: f64,
        chi: f64,
        diffusion: f64,
        ancilla_dim: usize,
    ) -> Result<Self> {
        if diffusion <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "phase-diffusion strength {diffusion} must be positive"
            )));
        }
        let epsilon = (gamma / (2.0 * diffusion)).sqrt();
        Ok(AncillaParams {
            gamma,
            g: gamma * chi / (2.0 * epsilon),
            epsilon,
            ancilla_dim,
            detuning: 0.0,
        })
    }

    /// Dispersive atom loop at a target effective phase chi = 2g^2/(Gamma Delta),
    /// with the bare detuning recovered from Delta = delta + g^2/delta.
    pub fn jc_linked(gamma: f64, chi: f64, big_delta: f64) -> Result<Self> {
        let g2 = chi * gamma * big_delta / 2.0;
        let disc = big_delta * big_delta - 4.0 * g2;
        if disc < 0.0 {
            return Err(Error::InvalidParam(format!(
                "Delta {big_delta} too small for chi {chi} at Gamma {gamma}: needs Delta >= {}",
                2.0 * chi * gamma
            )));
        }
        let delta = 0.5 * (big_delta + disc.sqrt());
        Ok(AncillaParams { gamma, g: g2.sqrt(), epsilon: 0.0, ancilla_dim: 2, detuning: delta })
    }

    fn check_gamma(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            Err(Error::InvalidParam(format!("ancilla damping {} must be positive", self.gamma)))
        } else {
            Ok(())
        }
    }

    fn check_mode_dim(&self) -> Result<()> {
        if self.ancilla_dim < 2 {
            Err(Error::InvalidParam(format!("ancilla dimension {} below 2", self.ancilla_dim)))
        } else {
            Ok(())
        }
    }
}

/// H = -(i lambda/4)(a^2 - a^dag 2) on the given factor.
pub fn parametric_hamiltonian(space: &SpaceSpec, factor: usize, lambda: f64) -> Result<Operator> {
    let a = fock::annihilation(space, factor)?;
    let a2 = a.matmul(&a)?;
    let h = a2.scale(c(0.0, -lambda / 4.0)).add(&a2.dagger().scale(c(0.0, lambda / 4.0)))?;
    Ok(h.with_hermitian_hint(true))
}

/// Z = chi a^dag a on the given factor.
pub fn phase_operator(space: &SpaceSpec, factor: usize, chi: f64) -> Result<Operator> {
    Ok(fock::number(space, factor)?.scale(c(chi, 0.0)))
}

/// The atom-loop feedback unitary exp(-i (pi/2) sigma_x), through the
/// operator-function machinery rather than its closed form.
pub fn tla_feedback_unitary(space: &SpaceSpec, factor: usize) -> Result<Operator> {
    let sx = fock::tensor_embed(space, factor, &fock::sigma_x_matrix())?.with_hermitian_hint(true);
    fock::op_function(&sx, |x| Complex64::from_polar(1.0, -FRAC_PI_2 * x))
}

/// Damped parametric oscillator, no feedback: C[H] + D[a].
pub fn build_no_feedback(sys: &SystemParams) -> Result<SuperOp> {
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    SuperOp::commutator(&h)?.add(&SuperOp::dissipator(&a)?)
}

/// Instantaneous feedback: C[H] + D[e^{-iZ} a].
pub fn build_simple_feedback(sys: &SystemParams) -> Result<SuperOp> {
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    let z = phase_operator(&space, 0, sys.chi)?;
    let u = fock::op_function(&z, |v| Complex64::from_polar(1.0, -v))?;
    let cfb = u.matmul(&a)?;
    SuperOp::commutator(&h)?.add(&SuperOp::dissipator(&cfb)?)
}

/// Form selector for the eliminated atom-loop generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EoTlaForm {
    /// C[H] + D[a] + C[Z](1 - C[Z])^{-1} J[a].
    Closed,
    /// C[H] + int_0^inf dq e^{-q} D[e^{-iqZ} a].
    Quadrature,
}

/// Electro-optic feedback through a fast two-level atom, atom eliminated.
pub fn build_eo_tla_adiabatic(sys: &SystemParams, form: EoTlaForm) -> Result<SuperOp> {
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    let z = phase_operator(&space, 0, sys.chi)?;
    let base = SuperOp::commutator(&h)?;
    match form {
        EoTlaForm::Closed => base
            .add(&SuperOp::dissipator(&a)?)?
            .add(&SuperOp::resolvent_feedback_tla(&z, &a)?),
        EoTlaForm::Quadrature => base.add(&SuperOp::quadrature_feedback_dissipator(&z, &a)?),
    }
}

/// Electro-optic feedback with the atom kept: on system (x) atom,
/// -i[H + g a^dag a sigma^dag sigma + delta sigma^dag sigma, .]
/// + D[exp(-i pi/2 sigma_x) a] + Gamma D[sigma].
pub fn build_eo_tla_compound(sys: &SystemParams, anc: &AncillaParams) -> Result<SuperOp> {
    anc.check_gamma()?;
    let space = SpaceSpec::fock_two_level(sys.dim());
    let a = fock::annihilation(&space, 0)?;
    let n_sys = fock::number(&space, 0)?;
    let sigma = fock::sigma_minus(&space, 1)?;
    let pe = fock::number(&space, 1)?;
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?
        .add(&n_sys.matmul(&pe)?.scale(c(anc.g, 0.0)))?
        .add(&pe.scale(c(anc.detuning, 0.0)))?
        .with_hermitian_hint(true);
    let u = tla_feedback_unitary(&space, 1)?;
    let cfb = u.matmul(&a)?;
    SuperOp::commutator(&h)?
        .add(&SuperOp::dissipator(&cfb)?)?
        .add(&SuperOp::dissipator(&sigma)?.scale(c(anc.gamma, 0.0)))
}

/// Electro-optic feedback through an eliminated second mode:
/// C[H] + D[e^{-iZ} a] + (Gamma/eps^2) D[Z].
pub fn build_eo_mode_adiabatic(sys: &SystemParams, anc: &AncillaParams) -> Result<SuperOp> {
    anc.check_gamma()?;
    if anc.epsilon <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "feedback drive amplitude {} must be positive",
            anc.epsilon
        )));
    }
    let diffusion = anc.gamma / (anc.epsilon * anc.epsilon);
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    let z = phase_operator(&space, 0, sys.chi)?;
    let u = fock::op_function(&z, |v| Complex64::from_polar(1.0, -v))?;
    let cfb = u.matmul(&a)?;
    SuperOp::commutator(&h)?
        .add(&SuperOp::dissipator(&cfb)?)?
        .add(&SuperOp::dissipator(&z)?.scale(c(diffusion, 0.0)))
}

/// One jump channel of an unraveled model. The rate is folded into the
/// operator (c = sqrt(rate) * base).
#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub op: Operator,
    /// Detections in this channel kick the classical filter f by +1.
    pub increments_filter: bool,
}

/// The displaced-frame mode-feedback model. Its Hamiltonian carries a
/// classical filter f(t) that jumps at system detections and decays in
/// between, so the generator is time dependent along each trajectory:
///
///   W' = -i[h_static + f(t) h_filter, W] + sum_k D[c_k] W,
///   f -> f + 1 at system-channel detections, f' = -(decay) f otherwise.
#[derive(Clone, Debug)]
pub struct TimeDependentModel {
    pub space: SpaceSpec,
    pub h_static: Operator,
    pub h_filter: Operator,
    pub filter_decay: f64,
    pub channels: Vec<JumpChannel>,
}

impl TimeDependentModel {
    /// Static generator with the filter frozen at a fixed value.
    pub fn frozen(&self, f: f64) -> Result<SuperOp> {
        let h = self.h_static.add(&self.h_filter.scale(c(f, 0.0)))?.with_hermitian_hint(true);
        let mut l = SuperOp::commutator(&h)?;
        for ch in &self.channels {
            l = l.add(&SuperOp::dissipator(&ch.op)?)?;
        }
        Ok(l)
    }
}

/// Mode-feedback loop kept in full, in the frame displaced by the classical
/// filter: W' = -i[g a^dag a (b + b^dag + eps f) + H, W] + D[a]W + Gamma D[b]W.
pub fn build_eo_mode_compound_transformed(
    sys: &SystemParams,
    anc: &AncillaParams,
) -> Result<TimeDependentModel> {
    anc.check_gamma()?;
    anc.check_mode_dim()?;
    let space = SpaceSpec::fock_fock(sys.dim(), anc.ancilla_dim);
    let a = fock::annihilation(&space, 0)?;
    let b = fock::annihilation(&space, 1)?;
    let n_sys = fock::number(&space, 0)?;
    let x_anc = b.add(&b.dagger())?;
    let h_static = parametric_hamiltonian(&space, 0, sys.lambda)?
        .add(&n_sys.matmul(&x_anc)?.scale(c(anc.g, 0.0)))?
        .with_hermitian_hint(true);
    let h_filter = n_sys.scale(c(anc.g * anc.epsilon, 0.0));
    Ok(TimeDependentModel {
        space,
        h_static,
        h_filter,
        filter_decay: anc.gamma / 2.0,
        channels: vec![
            JumpChannel { op: a, increments_filter: true },
            JumpChannel { op: b.scale(c(anc.gamma.sqrt(), 0.0)), increments_filter: false },
        ],
    })
}

/// Which ancilla closes the all-optical loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AncillaKind {
    TwoLevel,
    Mode,
}

/// All-optical (cascaded) feedback with the ancilla kept:
/// -i[H + g a^dag a x^dag x, .] + D[a] + Gamma D[x] + sqrt(Gamma)([aW,x^dag]+[x,Wa^dag]).
pub fn build_ao_compound(
    sys: &SystemParams,
    anc: &AncillaParams,
    kind: AncillaKind,
) -> Result<SuperOp> {
    anc.check_gamma()?;
    let space = match kind {
        AncillaKind::TwoLevel => SpaceSpec::fock_two_level(sys.dim()),
        AncillaKind::Mode => {
            anc.check_mode_dim()?;
            SpaceSpec::fock_fock(sys.dim(), anc.ancilla_dim)
        }
    };
    let a = fock::annihilation(&space, 0)?;
    let x = match kind {
        AncillaKind::TwoLevel => fock::sigma_minus(&space, 1)?,
        AncillaKind::Mode => fock::annihilation(&space, 1)?,
    };
    let n_sys = fock::number(&space, 0)?;
    let n_anc = fock::number(&space, 1)?;
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?
        .add(&n_sys.matmul(&n_anc)?.scale(c(anc.g, 0.0)))?
        .with_hermitian_hint(true);
    SuperOp::commutator(&h)?
        .add(&SuperOp::dissipator(&a)?)?
        .add(&SuperOp::dissipator(&x)?.scale(c(anc.gamma, 0.0)))?
        .add(&SuperOp::cascade_term(&a, &x, anc.gamma)?)
}

/// Form selector for the eliminated all-optical generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AoForm {
    /// C[H] + D[a] + C[Z] J[(1 + iZ/2)^{-1} a].
    Rational,
    /// C[H] + D[exp(-2i arctan(Z/2)) a].
    Arctan,
}

/// All-optical feedback with the ancilla eliminated.
pub fn build_ao_adiabatic(sys: &SystemParams, form: AoForm) -> Result<SuperOp> {
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    let z = phase_operator(&space, 0, sys.chi)?;
    let base = SuperOp::commutator(&h)?;
    match form {
        AoForm::Rational => base
            .add(&SuperOp::dissipator(&a)?)?
            .add(&SuperOp::resolvent_feedback_ao(&z, &a)?),
        AoForm::Arctan => {
            let u = fock::op_function(&z, |v| Complex64::from_polar(1.0, -2.0 * (v / 2.0).atan()))?;
            base.add(&SuperOp::dissipator(&u.matmul(&a)?)?)
        }
    }
}

/// Kerr oscillator for comparison: C[H + (chi/2)(a^dag)^2 a^2] + D[a].
pub fn build_kerr(sys: &SystemParams) -> Result<SuperOp> {
    let space = sys.space();
    let a = fock::annihilation(&space, 0)?;
    let a2 = a.matmul(&a)?;
    let kerr = a2.dagger().matmul(&a2)?.scale(c(sys.chi / 2.0, 0.0));
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?
        .add(&kerr)?
        .with_hermitian_hint(true);
    SuperOp::commutator(&h)?.add(&SuperOp::dissipator(&a)?)
}

/// Dispersive atom loop kept in full, interaction picture:
/// C[H + (g^2/delta) a^dag a + Delta sigma^dag sigma + g(a sigma^dag + sigma a^dag)]
/// + Gamma D[sigma] + D[exp(-i pi/2 sigma_x) a], with Delta = delta + g^2/delta.
pub fn build_jc_compound_interaction(sys: &SystemParams, anc: &AncillaParams) -> Result<SuperOp> {
    anc.check_gamma()?;
    if anc.detuning == 0.0 {
        return Err(Error::InvalidParam("dispersive coupling needs a nonzero detuning".into()));
    }
    let big_delta = anc.detuning + anc.g * anc.g / anc.detuning;
    let space = SpaceSpec::fock_two_level(sys.dim());
    let a = fock::annihilation(&space, 0)?;
    let n_sys = fock::number(&space, 0)?;
    let sigma = fock::sigma_minus(&space, 1)?;
    let pe = fock::number(&space, 1)?;
    let exchange = a.matmul(&sigma.dagger())?.add(&sigma.matmul(&a.dagger())?)?;
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?
        .add(&n_sys.scale(c(anc.g * anc.g / anc.detuning, 0.0)))?
        .add(&pe.scale(c(big_delta, 0.0)))?
        .add(&exchange.scale(c(anc.g, 0.0)))?
        .with_hermitian_hint(true);
    let u = tla_feedback_unitary(&space, 1)?;
    let cfb = u.matmul(&a)?;
    SuperOp::commutator(&h)?
        .add(&SuperOp::dissipator(&sigma)?.scale(c(anc.gamma, 0.0)))?
        .add(&SuperOp::dissipator(&cfb)?)
}

/// Dispersive atom loop with the atom eliminated: the atom-loop feedback
/// term at Z_eff = (2g^2/(Gamma Delta)) a^dag a, plus the residual extra
/// damping (Gamma g^2/Delta^2) D[a] and Kerr-like C[(g^4/Delta^3)(a^dag)^2 a^2].
pub fn build_jc_adiabatic(sys: &SystemParams, anc: &AncillaParams) -> Result<SuperOp> {
    anc.check_gamma()?;
    if anc.detuning == 0.0 {
        return Err(Error::InvalidParam("dispersive coupling needs a nonzero detuning".into()));
    }
    let big_delta = anc.detuning + anc.g * anc.g / anc.detuning;
    let g2 = anc.g * anc.g;
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    let zeff = phase_operator(&space, 0, 2.0 * g2 / (anc.gamma * big_delta))?;
    let a2 = a.matmul(&a)?;
    let kerr = a2
        .dagger()
        .matmul(&a2)?
        .scale(c(g2 * g2 / (big_delta * big_delta * big_delta), 0.0))
        .with_hermitian_hint(true);
    SuperOp::commutator(&h)?
        .add(&SuperOp::dissipator(&a)?)?
        .add(&SuperOp::resolvent_feedback_tla(&zeff, &a)?)?
        .add(&SuperOp::dissipator(&a)?.scale(c(anc.gamma * g2 / (big_delta * big_delta), 0.0)))?
        .add(&SuperOp::commutator(&kerr)?)
}

/// Which feedback expansion to truncate at third order in Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionScheme {
    Simple,
    EoTla,
    Ao,
}

/// Third-order (in Z) expansion of a feedback generator, used to verify the
/// order at which the schemes separate. All three share
/// C[H] + D[a] + m(z_a, z_b) J[a] with scheme-specific multipliers whose
/// Taylor data match the exact generators through chi^3.
pub fn build_third_order_expansion(sys: &SystemParams, scheme: ExpansionScheme) -> Result<SuperOp> {
    let space = sys.space();
    let h = parametric_hamiltonian(&space, 0, sys.lambda)?;
    let a = fock::annihilation(&space, 0)?;
    let z = phase_operator(&space, 0, sys.chi)?;
    let m = move |za: f64, zb: f64| -> Complex64 {
        let e1 = -I * c(za - zb, 0.0);
        match scheme {
            ExpansionScheme::Simple => e1 + e1 * e1 / 2.0 + e1 * e1 * e1 / 6.0,
            ExpansionScheme::EoTla => e1 + e1 * e1 + e1 * e1 * e1,
            ExpansionScheme::Ao => {
                e1 + e1 * e1 / 2.0 + e1 * c((za * zb - za * za - zb * zb) / 4.0, 0.0)
            }
        }
    };
    SuperOp::commutator(&h)?
        .add(&SuperOp::dissipator(&a)?)?
        .add(&SuperOp::multiplier_feedback(&z, &a, m)?)
}

/// A generator as handed to the solvers: static, or time dependent through
/// the classical filter.
#[derive(Clone, Debug)]
pub enum Generator {
    Static(SuperOp),
    TimeDependent(TimeDependentModel),
}

/// The scheme catalog exposed to configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    NoFeedback,
    Simple,
    EoTlaCompound,
    EoTlaAdiabatic,
    EoModeAdiabatic,
    EoModeTrajectory,
    AoTlaCompound,
    AoModeCompound,
    AoAdiabatic,
    Kerr,
    JcCompound,
    JcAdiabatic,
}

impl Scheme {
    pub const ALL: [Scheme; 12] = [
        Scheme::NoFeedback,
        Scheme::Simple,
        Scheme::EoTlaCompound,
        Scheme::EoTlaAdiabatic,
        Scheme::EoModeAdiabatic,
        Scheme::EoModeTrajectory,
        Scheme::AoTlaCompound,
        Scheme::AoModeCompound,
        Scheme::AoAdiabatic,
        Scheme::Kerr,
        Scheme::JcCompound,
        Scheme::JcAdiabatic,
    ];

    pub fn parse(name: &str) -> Option<Scheme> {
        Some(match name {
            "none" => Scheme::NoFeedback,
            "simple" => Scheme::Simple,
            "eo_tla_compound" => Scheme::EoTlaCompound,
            "eo_tla_adiabatic" => Scheme::EoTlaAdiabatic,
            "eo_mode_adiabatic" => Scheme::EoModeAdiabatic,
            "eo_mode_trajectory" => Scheme::EoModeTrajectory,
            "ao_tla_compound" => Scheme::AoTlaCompound,
            "ao_mode_compound" => Scheme::AoModeCompound,
            "ao_adiabatic" => Scheme::AoAdiabatic,
            "kerr" => Scheme::Kerr,
            "jc_compound" => Scheme::JcCompound,
            "jc_adiabatic" => Scheme::JcAdiabatic,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::NoFeedback => "none",
            Scheme::Simple => "simple",
            Scheme::EoTlaCompound => "eo_tla_compound",
            Scheme::EoTlaAdiabatic => "eo_tla_adiabatic",
            Scheme::EoModeAdiabatic => "eo_mode_adiabatic",
            Scheme::EoModeTrajectory => "eo_mode_trajectory",
            Scheme::AoTlaCompound => "ao_tla_compound",
            Scheme::AoModeCompound => "ao_mode_compound",
            Scheme::AoAdiabatic => "ao_adiabatic",
            Scheme::Kerr => "kerr",
            Scheme::JcCompound => "jc_compound",
            Scheme::JcAdiabatic => "jc_adiabatic",
        }
    }

    /// Whether the builder reads AncillaParams at all.
    pub fn needs_ancilla(&self) -> bool {
        !matches!(
            self,
            Scheme::NoFeedback | Scheme::Simple | Scheme::EoTlaAdiabatic | Scheme::AoAdiabatic | Scheme::Kerr
        )
    }

    /// Whether the generator lives on a compound (system x ancilla) space.
    pub fn is_compound(&self) -> bool {
        matches!(
            self,
            Scheme::EoTlaCompound
                | Scheme::EoModeTrajectory
                | Scheme::AoTlaCompound
                | Scheme::AoModeCompound
                | Scheme::JcCompound
        )
    }

    pub fn build(&self, sys: &SystemParams, anc: Option<&AncillaParams>) -> Result<Generator> {
        let need = || {
            anc.ok_or_else(|| {
                Error::InvalidParam(format!("scheme {} needs ancilla parameters", self.name()))
            })
        };
        Ok(match self {
            Scheme::NoFeedback => Generator::Static(build_no_feedback(sys)?),
            Scheme::Simple => Generator::Static(build_simple_feedback(sys)?),
            Scheme::EoTlaCompound => Generator::Static(build_eo_tla_compound(sys, need()?)?),
            Scheme::EoTlaAdiabatic => {
                Generator::Static(build_eo_tla_adiabatic(sys, EoTlaForm::Closed)?)
            }
            Scheme::EoModeAdiabatic => {
                Generator::Static(build_eo_mode_adiabatic(sys, need()?)?)
            }
            Scheme::EoModeTrajectory => {
                Generator::TimeDependent(build_eo_mode_compound_transformed(sys, need()?)?)
            }
            Scheme::AoTlaCompound => {
                Generator::Static(build_ao_compound(sys, need()?, AncillaKind::TwoLevel)?)
            }
            Scheme::AoModeCompound => {
                Generator::Static(build_ao_compound(sys, need()?, AncillaKind::Mode)?)
            }
            Scheme::AoAdiabatic => Generator::Static(build_ao_adiabatic(sys, AoForm::Rational)?),
            Scheme::Kerr => Generator::Static(build_kerr(sys)?),
            Scheme::JcCompound => {
                Generator::Static(build_jc_compound_interaction(sys, need()?)?)
            }
            Scheme::JcAdiabatic => Generator::Static(build_jc_adiabatic(sys, need()?)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::superop_distance;
    use std::f64::consts::PI;

    fn sys_small() -> SystemParams {
        SystemParams::new(0.3, 0.7, 5).unwrap()
    }

    #[test]
    fn simple_at_chi_zero_is_no_feedback() {
        let mut sys = sys_small();
        sys.chi = 0.0;
        let l1 = build_simple_feedback(&sys).unwrap();
        let l2 = build_no_feedback(&sys).unwrap();
        assert!(superop_distance(&l1, &l2).unwrap() < 1e-15);
    }

    #[test]
    fn kerr_at_chi_zero_is_no_feedback() {
        let mut sys = sys_small();
        sys.chi = 0.0;
        let l1 = build_kerr(&sys).unwrap();
        let l2 = build_no_feedback(&sys).unwrap();
        assert!(superop_distance(&l1, &l2).unwrap() < 1e-15);
    }

    #[test]
    fn adiabatic_builders_at_chi_zero_reduce() {
        let mut sys = sys_small();
        sys.chi = 0.0;
        let base = build_no_feedback(&sys).unwrap();
        for l in [
            build_eo_tla_adiabatic(&sys, EoTlaForm::Closed).unwrap(),
            build_ao_adiabatic(&sys, AoForm::Rational).unwrap(),
            build_ao_adiabatic(&sys, AoForm::Arctan).unwrap(),
        ] {
            assert!(superop_distance(&l, &base).unwrap() < 1e-13);
        }
    }

    #[test]
    fn feedback_unitary_matches_closed_form() {
        let space = SpaceSpec::fock_two_level(3);
        let u = tla_feedback_unitary(&space, 1).unwrap();
        // exp(-i pi/2 sigma_x) = -i sigma_x
        let want = fock::tensor_embed(&space, 1, &fock::sigma_x_matrix())
            .unwrap()
            .scale(c(0.0, -1.0));
        assert!(u.sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn ao_forms_agree() {
        let sys = SystemParams::new(0.3, 0.9, 5).unwrap();
        let l1 = build_ao_adiabatic(&sys, AoForm::Rational).unwrap();
        let l2 = build_ao_adiabatic(&sys, AoForm::Arctan).unwrap();
        let d = superop_distance(&l1, &l2).unwrap();
        assert!(d < 1e-12, "forms differ by {d}");
    }

    #[test]
    fn eo_tla_forms_agree() {
        let sys = SystemParams::new(0.3, 0.9, 5).unwrap();
        let l1 = build_eo_tla_adiabatic(&sys, EoTlaForm::Closed).unwrap();
        let l2 = build_eo_tla_adiabatic(&sys, EoTlaForm::Quadrature).unwrap();
        let d = superop_distance(&l1, &l2).unwrap();
        assert!(d < 1e-10, "forms differ by {d}");
    }

    #[test]
    fn every_static_builder_preserves_trace_and_hermiticity() {
        let sys = sys_small();
        let anc_tla = AncillaParams::tla_detuned(2.3, 1.1, 0.4);
        let anc_mode = AncillaParams::mode(2.3, 1.1, 3);
        let anc_eo_mode = AncillaParams::eo_mode_linked(2.3, 0.7, 0.002, 3).unwrap();
        let anc_jc = AncillaParams::tla_detuned(2.3, 1.1, 3.7);
        let generators = vec![
            build_no_feedback(&sys).unwrap(),
            build_simple_feedback(&sys).unwrap(),
            build_eo_tla_adiabatic(&sys, EoTlaForm::Closed).unwrap(),
            build_eo_tla_adiabatic(&sys, EoTlaForm::Quadrature).unwrap(),
            build_eo_tla_compound(&sys, &anc_tla).unwrap(),
            build_eo_mode_adiabatic(&sys, &anc_eo_mode).unwrap(),
            build_ao_compound(&sys, &anc_mode, AncillaKind::TwoLevel).unwrap(),
            build_ao_compound(&sys, &anc_mode, AncillaKind::Mode).unwrap(),
            build_ao_adiabatic(&sys, AoForm::Rational).unwrap(),
            build_ao_adiabatic(&sys, AoForm::Arctan).unwrap(),
            build_kerr(&sys).unwrap(),
            build_jc_compound_interaction(&sys, &anc_jc).unwrap(),
            build_jc_adiabatic(&sys, &anc_jc).unwrap(),
            build_third_order_expansion(&sys, ExpansionScheme::Simple).unwrap(),
            build_third_order_expansion(&sys, ExpansionScheme::EoTla).unwrap(),
            build_third_order_expansion(&sys, ExpansionScheme::Ao).unwrap(),
            build_eo_mode_compound_transformed(&sys, &anc_mode)
                .unwrap()
                .frozen(0.37)
                .unwrap(),
        ];
        for (k, l) in generators.iter().enumerate() {
            l.check_trace_preserving(1e-10)
                .unwrap_or_else(|e| panic!("generator {k}: {e}"));
            let dev = l.hermiticity_preservation_deviation(5).unwrap();
            assert!(dev < 1e-10, "generator {k} hermiticity deviation {dev}");
        }
    }

    #[test]
    fn linked_constructors_tie_parameters() {
        let anc = AncillaParams::eo_tla_linked(20.0, FRAC_PI_2);
        assert!((anc.g - 10.0 * PI).abs() < 1e-12);

        let anc = AncillaParams::ao_linked(10.0, FRAC_PI_2, 10);
        assert!((anc.g - 10.0 * PI / 8.0).abs() < 1e-12);

        let anc = AncillaParams::eo_mode_linked(10.0, FRAC_PI_2, 0.001, 8).unwrap();
        assert!((anc.epsilon - (500.0f64 * 10.0).sqrt()).abs() < 1e-9);
        assert!((anc.gamma / (2.0 * anc.epsilon * anc.epsilon) - 0.001).abs() < 1e-15);
        assert!((2.0 * anc.epsilon * anc.g / anc.gamma - FRAC_PI_2).abs() < 1e-12);

        let anc = AncillaParams::jc_linked(4.0, FRAC_PI_2, 16.0).unwrap();
        let big = anc.detuning + anc.g * anc.g / anc.detuning;
        assert!((big - 16.0).abs() < 1e-10);
        assert!((2.0 * anc.g * anc.g / (anc.gamma * big) - FRAC_PI_2).abs() < 1e-12);
        // too small a Delta has no real solution
        assert!(AncillaParams::jc_linked(4.0, FRAC_PI_2, 4.0).is_err());
    }

    #[test]
    fn jc_rejects_zero_detuning() {
        let sys = sys_small();
        let anc = AncillaParams::tla(2.3, 1.1);
        assert!(build_jc_compound_interaction(&sys, &anc).is_err());
        assert!(build_jc_adiabatic(&sys, &anc).is_err());
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()), Some(s));
        }
        assert_eq!(Scheme::parse("bogus"), None);
    }

    #[test]
    fn mode_loop_diffusion_conserves_trace_and_photon_number() {
        let space = SpaceSpec::fock(7);
        let z = phase_operator(&space, 0, 1.3).unwrap();
        let dz = SuperOp::dissipator(&z).unwrap();
        let rho = crate::superop::deterministic_hermitian(7, 0.4);
        let out = dz.apply(&rho).unwrap();
        let trace: Complex64 = (0..7).map(|i| out[(i, i)]).sum();
        let n_rate: Complex64 = (0..7).map(|i| c(i as f64, 0.0) * out[(i, i)]).sum();
        assert!(trace.norm() < 1e-12, "trace rate {trace}");
        assert!(n_rate.norm() < 1e-11, "photon rate {n_rate}");
    }

    #[test]
    fn mode_loop_heavy_drive_limit_is_simple_feedback() {
        let sys = SystemParams::new(0.5, 1.1, 6).unwrap();
        // vanishing diffusion means a heavily driven loop mode; the phase
        // kick survives while the D[Z] term scales away
        let anc = AncillaParams::eo_mode_linked(1.0, sys.chi, 1e-9, 4).unwrap();
        let l_mode = build_eo_mode_adiabatic(&sys, &anc).unwrap();
        let l_simple = build_simple_feedback(&sys).unwrap();
        let d = superop_distance(&l_mode, &l_simple).unwrap();
        assert!(d < 1e-5, "distance {d:.3e}");
    }

    #[test]
    fn transformed_model_without_coupling_is_a_plain_damped_oscillator() {
        let sys = SystemParams::new(0.5, 0.9, 6).unwrap();
        let anc = AncillaParams { epsilon: 1.7, ..AncillaParams::mode(2.0, 0.0, 3) };
        let model = build_eo_mode_compound_transformed(&sys, &anc).unwrap();
        let l0 = model.frozen(0.0).unwrap();
        assert!(superop_distance(&l0, &model.frozen(7.0).unwrap()).unwrap() < 1e-15);
        let reduced = crate::steady::reduced_steady(&l0, 0).unwrap();
        let base = crate::steady::steady_state(&build_no_feedback(&sys).unwrap()).unwrap();
        let worst = reduced
            .data()
            .iter()
            .zip(base.state.data().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "reduced steady off by {worst:.3e}");
    }

    #[test]
    fn kerr_interaction_conserves_photon_number() {
        let space = SpaceSpec::fock(8);
        let a = fock::annihilation(&space, 0).unwrap();
        let a2 = a.matmul(&a).unwrap();
        let kerr = a2.dagger().matmul(&a2).unwrap().scale(c(0.45, 0.0)).with_hermitian_hint(true);
        let gen = SuperOp::commutator(&kerr).unwrap();
        let rho = crate::superop::deterministic_hermitian(8, 0.7);
        let out = gen.apply(&rho).unwrap();
        let n_rate: Complex64 = (0..8).map(|i| c(i as f64, 0.0) * out[(i, i)]).sum();
        assert!(n_rate.norm() < 1e-11, "photon rate {n_rate}");
    }

    #[test]
    fn dispersive_adiabatic_is_base_plus_extra_damping_and_kerr() {
        fn sup_norm(l: &SuperOp) -> f64 {
            superop_distance(l, &l.scale(c(0.0, 0.0))).unwrap()
        }
        let gamma = 4.0;
        let mut norms = Vec::new();
        for big_delta in [16.0, 32.0] {
            let anc = AncillaParams::jc_linked(gamma, FRAC_PI_2, big_delta).unwrap();
            let g2 = anc.g * anc.g;
            // match the eliminated loop's feedback phase, then peel off the
            // residual damping and Kerr pieces by hand
            let sys = SystemParams::new(0.5, 2.0 * g2 / (gamma * big_delta), 6).unwrap();
            let space = sys.space();
            let a = fock::annihilation(&space, 0).unwrap();
            let a2 = a.matmul(&a).unwrap();
            let kerr = a2
                .dagger()
                .matmul(&a2)
                .unwrap()
                .scale(c(g2 * g2 / (big_delta * big_delta * big_delta), 0.0))
                .with_hermitian_hint(true);
            let e1 = SuperOp::dissipator(&a)
                .unwrap()
                .scale(c(gamma * g2 / (big_delta * big_delta), 0.0));
            let e2 = SuperOp::commutator(&kerr).unwrap();
            let rebuilt = build_eo_tla_adiabatic(&sys, EoTlaForm::Closed)
                .unwrap()
                .add(&e1)
                .unwrap()
                .add(&e2)
                .unwrap();
            let l_jc = build_jc_adiabatic(&sys, &anc).unwrap();
            let d = superop_distance(&l_jc, &rebuilt).unwrap();
            assert!(d < 1e-10, "Delta={big_delta}: decomposition misses by {d:.3e}");
            norms.push((sup_norm(&e1), sup_norm(&e2)));
        }
        // with the feedback phase pinned, g^2 grows like Delta, so both
        // residual coefficients fall like 1/Delta
        let r1 = norms[0].0 / norms[1].0;
        let r2 = norms[0].1 / norms[1].1;
        assert!((r1 - 2.0).abs() < 1e-9, "damping ratio {r1}");
        assert!((r2 - 2.0).abs() < 1e-9, "kerr ratio {r2}");
    }

    #[test]
    fn filter_frozen_at_zero_matches_undriven_assembly() {
        let sys = sys_small();
        let anc = AncillaParams { epsilon: 1.7, ..AncillaParams::mode(2.3, 1.1, 3) };
        let model = build_eo_mode_compound_transformed(&sys, &anc).unwrap();
        assert_eq!(model.channels.len(), 2);
        assert!(model.channels[0].increments_filter);
        assert!(!model.channels[1].increments_filter);
        assert!((model.filter_decay - 1.15).abs() < 1e-15);
        // eps enters only through the filter coupling
        let anc0 = AncillaParams::mode(2.3, 1.1, 3);
        let model0 = build_eo_mode_compound_transformed(&sys, &anc0).unwrap();
        let l1 = model.frozen(0.0).unwrap();
        let l2 = model0.frozen(123.0).unwrap();
        assert!(superop_distance(&l1, &l2).unwrap() < 1e-12);
    }
}
