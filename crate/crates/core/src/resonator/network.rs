use std::f64::consts::PI;

use num_complex::Complex64;

use super::ResonatorSpec;

/// What occupies the inductor branch (in series with the contact resistance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inductor {
    Superconducting { lk_nh: f64 },
    /// Normal film; the inductance is replaced by the normal-state resistance.
    Normal { r_normal_ohm: f64 },
}

fn tank_impedance(spec: &ResonatorSpec, inductor: &Inductor, r_shunt_ohm: f64, w: f64) -> Complex64 {
    let j = Complex64::i();
    let branch = match *inductor {
        Inductor::Superconducting { lk_nh } => spec.r_contact_ohm + j * w * lk_nh * 1e-9,
        Inductor::Normal { r_normal_ohm } => Complex64::new(spec.r_contact_ohm + r_normal_ohm, 0.0),
    };
    let y = j * w * (spec.c_ff + spec.c_p_ff) * 1e-15 + branch.inv() + 1.0 / r_shunt_ohm;
    y.inv()
}

/// Input impedance Z(C_c) + [Z(C) ∥ Z(C_p) ∥ (R_contact + jωL) ∥ R_shunt], Ω.
pub fn input_impedance(spec: &ResonatorSpec, lk_nh: f64, r_shunt_ohm: f64, f_hz: f64) -> Complex64 {
    input_impedance_with(spec, &Inductor::Superconducting { lk_nh }, r_shunt_ohm, f_hz)
}

pub fn input_impedance_with(
    spec: &ResonatorSpec,
    inductor: &Inductor,
    r_shunt_ohm: f64,
    f_hz: f64,
) -> Complex64 {
    let w = 2.0 * PI * f_hz;
    let z_cc = Complex64::new(0.0, -1.0 / (w * spec.c_c_ff * 1e-15));
    z_cc + tank_impedance(spec, inductor, r_shunt_ohm, w)
}

/// Reflection coefficient (Z_in − Z_0)/(Z_in + Z_0).
pub fn s11(spec: &ResonatorSpec, lk_nh: f64, r_shunt_ohm: f64, f_hz: f64) -> Complex64 {
    s11_with(spec, &Inductor::Superconducting { lk_nh }, r_shunt_ohm, f_hz)
}

pub fn s11_with(spec: &ResonatorSpec, inductor: &Inductor, r_shunt_ohm: f64, f_hz: f64) -> Complex64 {
    let z = input_impedance_with(spec, inductor, r_shunt_ohm, f_hz);
    if z.re.is_infinite() || z.im.is_infinite() {
        return Complex64::new(1.0, 0.0);
    }
    (z - spec.z0_ohm) / (z + spec.z0_ohm)
}

/// Inductance (nH) resonating with C_tot = C_c + C + C_p at `f_hz`.
pub fn lk_from_resonance(f_hz: f64, spec: &ResonatorSpec) -> f64 {
    let w = 2.0 * PI * f_hz;
    1.0 / (w * w * spec.c_tot_ff() * 1e-15) * 1e9
}

/// √(L_K / C_p) in kΩ.
pub fn characteristic_impedance(lk_nh: f64, c_p_ff: f64) -> f64 {
    (lk_nh * 1e-9 / (c_p_ff * 1e-15)).sqrt() * 1e-3
}

/// Peak amplitude (V) of a Thévenin source with impedance Z_0 delivering
/// `power_w` into a matched load: V = √(8 Z_0 P).
pub fn source_amplitude(z0_ohm: f64, power_w: f64) -> f64 {
    (8.0 * z0_ohm * power_w).sqrt()
}

/// Phasors (peak amplitudes) of the driven network.
#[derive(Debug, Clone, Copy)]
pub struct DriveResponse {
    pub z_in: Complex64,
    pub reflection: Complex64,
    /// Current entering the port, A.
    pub i_port: Complex64,
    /// Voltage across the tank, V.
    pub v_tank: Complex64,
    /// Current through the inductor branch, A.
    pub i_inductor: Complex64,
}

impl DriveResponse {
    /// Time-averaged power dissipated in R_contact, the film (if normal) and R_shunt, W.
    pub fn dissipated_power(&self, spec: &ResonatorSpec, inductor: &Inductor, r_shunt_ohm: f64) -> f64 {
        let r_branch = match *inductor {
            Inductor::Superconducting { .. } => spec.r_contact_ohm,
            Inductor::Normal { r_normal_ohm } => spec.r_contact_ohm + r_normal_ohm,
        };
        0.5 * self.i_inductor.norm_sqr() * r_branch + 0.5 * self.v_tank.norm_sqr() / r_shunt_ohm
    }
}

/// Solves the network driven by a source of peak amplitude `v_src` behind Z_0.
pub fn drive_response(
    spec: &ResonatorSpec,
    inductor: &Inductor,
    r_shunt_ohm: f64,
    f_hz: f64,
    v_src: f64,
) -> DriveResponse {
    let w = 2.0 * PI * f_hz;
    let j = Complex64::i();
    let z_tank = tank_impedance(spec, inductor, r_shunt_ohm, w);
    let z_cc = Complex64::new(0.0, -1.0 / (w * spec.c_c_ff * 1e-15));
    let z_in = z_cc + z_tank;
    let i_port = Complex64::new(v_src, 0.0) / (z_in + spec.z0_ohm);
    let v_tank = i_port * z_tank;
    let branch = match *inductor {
        Inductor::Superconducting { lk_nh } => spec.r_contact_ohm + j * w * lk_nh * 1e-9,
        Inductor::Normal { r_normal_ohm } => Complex64::new(spec.r_contact_ohm + r_normal_ohm, 0.0),
    };
    DriveResponse {
        z_in,
        reflection: (z_in - spec.z0_ohm) / (z_in + spec.z0_ohm),
        i_port,
        v_tank,
        i_inductor: v_tank / branch,
    }
}
