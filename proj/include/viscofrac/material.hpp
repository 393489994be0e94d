#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace viscofrac::material {

/// Symmetric 2x2 small-strain (or stress) tensor, plane strain (zz components implied zero).
struct SymTensor2 {
    double xx = 0.0;
    double yy = 0.0;
    double xy = 0.0;

    double trace() const { return xx + yy; }
    /// Double contraction a:b.
    double ddot(const SymTensor2& o) const { return xx * o.xx + yy * o.yy + 2.0 * xy * o.xy; }

    /// Voigt vector with engineering shear (exx, eyy, 2exy).
    Eigen::Vector3d voigt_strain() const { return {xx, yy, 2.0 * xy}; }
    static SymTensor2 from_voigt_strain(const Eigen::Vector3d& v) { return {v[0], v[1], 0.5 * v[2]}; }
    /// Voigt vector of a stress-like tensor (sxx, syy, sxy).
    Eigen::Vector3d voigt_stress() const { return {xx, yy, xy}; }

    friend SymTensor2 operator+(SymTensor2 a, const SymTensor2& b) { return {a.xx + b.xx, a.yy + b.yy, a.xy + b.xy}; }
    friend SymTensor2 operator-(SymTensor2 a, const SymTensor2& b) { return {a.xx - b.xx, a.yy - b.yy, a.xy - b.xy}; }
    friend SymTensor2 operator*(double s, SymTensor2 a) { return {s * a.xx, s * a.yy, s * a.xy}; }
};
using StrainTensor2D = SymTensor2;

struct Lame {
    double lambda;
    double mu;
};

/// Fracture parameters in internal units: Gc in N/mm, Yc in MPa, lengths in mm.
struct FractureParams {
    double Gc = 0.0;
    double l1 = 0.0;
    double Yc = 0.0;
    double l2 = 0.0;
};

/// Generalized Kelvin-Voigt chain: a free spring (index 0) in series with n
/// Kelvin-Voigt units. Moduli in MPa, retardation times in s.
struct GkvMaterial {
    std::vector<double> E;
    std::vector<double> tau;
    double nu = 0.0;
    int beta = 1;
    FractureParams fracture;

    std::size_t num_units() const { return tau.size(); }
    /// Throws DomainError when moduli, times, nu or beta are out of range.
    void validate() const;
};

Lame lame_constants(const GkvMaterial& mat, std::size_t i);

/// Plane-strain stiffness in Voigt form, mapping engineering strain to stress.
Eigen::Matrix3d stiffness_voigt(const Lame& l);

inline double degradation(double d) { return (1.0 - d) * (1.0 - d); }
inline double softening(double d) { return 2.0 * d * d; }

struct SplitStrain {
    SymTensor2 plus;
    SymTensor2 minus;
};

/// Spectral tension/compression split built from eigenpairs and the bracket operators.
SplitStrain eigen_split(const SymTensor2& eps);

/// Derivative of <eps>_+ (positive = true) or <eps>_- with respect to the
/// engineering Voigt strain, returned in stress-Voigt form (3x3). Coincident
/// eigenvalues use the isotropic limit.
Eigen::Matrix3d split_tangent(const SymTensor2& eps, bool positive);

struct FreeEnergy {
    double psi = 0.0;
    double psi_plus = 0.0;
    double psi_minus = 0.0;
};

/// Free energy density (MPa) of the chain for unit strains (eps_0, ..., eps_n).
/// Throws DomainError when d is outside [0, 1].
FreeEnergy free_energy(std::span<const SymTensor2> eps_units, double d, const GkvMaterial& mat);

/// dt * phi_v(deps/dt) (MPa) for the n internal strain increments. Throws for dt <= 0.
double viscous_dissipation_increment(std::span<const SymTensor2> deps_units, double dt, const GkvMaterial& mat);

/// Energy, stress and tangent of one unit's stored energy
///   g_plus mu <e>+:<e>+ + g_minus mu <e>-:<e>- + g_plus lambda/2 tr(e)^2
/// with respect to its engineering Voigt strain.
struct UnitResponse {
    double energy = 0.0;
    double energy_plus = 0.0;
    double energy_minus = 0.0;
    Eigen::Vector3d stress = Eigen::Vector3d::Zero();
    Eigen::Matrix3d tangent = Eigen::Matrix3d::Zero();
};
UnitResponse unit_response(const SymTensor2& eps, const Lame& l, double g_plus, double g_minus, bool split);

/// Lip-field pair (J/m^3, mm) equivalent to a phase-field pair (J/m^2, mm).
struct LipParams {
    double Yc_J_m3;
    double l2_mm;
};
LipParams calibrate(double Gc_J_m2, double l1_mm);

/// Inverse calibration: phase-field pair (J/m^2, mm) from a lip-field pair.
struct PhaseParams {
    double Gc_J_m2;
    double l1_mm;
};
PhaseParams calibrate_inverse(double Yc_J_m3, double l2_mm);

/// Mesh-corrected toughness Gc / (1 + h/(4 l1)).
double effective_gc(double Gc, double h_elem, double l1);

}  // namespace viscofrac::material
