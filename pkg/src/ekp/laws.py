"""Constitutive laws: barotropic pressure and capillarity coefficients.

Pressure laws provide p, p', the internal energy potential
P(rho) = rho * integral_1^rho p(z)/z^2 dz and its derivative in closed form.
Capillarity laws provide K(rho), K'(rho) and the combination
chi(rho) = rho*K(rho) with its derivative; the stress tensor is naturally
written in chi.
"""

import numpy as np


class PressureLaw:
    """Barotropic pressure p(rho) with p(0) = 0.

    kinds:
      power(gamma > 1, coeff a > 0):   p = a rho^gamma
      zero:                            p = 0
      polynomial(coefficients):        p = sum_m c_m rho^m, m >= 1
    """

    def __init__(self, kind, gamma=None, coeff=1.0, coefficients=None):
        self.kind = kind
        if kind == "power":
            if gamma is None or gamma <= 1:
                raise ValueError("power law needs gamma > 1")
            if coeff <= 0:
                raise ValueError("power law needs a positive coefficient")
            self.gamma = float(gamma)
            self.coeff = float(coeff)
        elif kind == "zero":
            pass
        elif kind == "polynomial":
            coeffs = dict(coefficients or {})
            for m in coeffs:
                if int(m) < 1:
                    raise ValueError("polynomial pressure needs exponents >= 1 (p(0) = 0)")
            self.coefficients = {int(m): float(c) for m, c in coeffs.items()}
        else:
            raise ValueError(f"unknown pressure kind {kind!r}")

    @classmethod
    def power(cls, gamma, coeff=1.0):
        return cls("power", gamma=gamma, coeff=coeff)

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def polynomial(cls, coefficients):
        return cls("polynomial", coefficients=coefficients)

    def p(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "power":
            return self.coeff * rho**self.gamma
        if self.kind == "zero":
            return np.zeros_like(rho)
        out = np.zeros_like(rho)
        for m, c in self.coefficients.items():
            out += c * rho**m
        return out

    def p_prime(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "power":
            return self.coeff * self.gamma * rho ** (self.gamma - 1.0)
        if self.kind == "zero":
            return np.zeros_like(rho)
        out = np.zeros_like(rho)
        for m, c in self.coefficients.items():
            out += c * m * rho ** (m - 1)
        return out

    def p_second(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "power":
            return self.coeff * self.gamma * (self.gamma - 1.0) * rho ** (self.gamma - 2.0)
        if self.kind == "zero":
            return np.zeros_like(rho)
        out = np.zeros_like(rho)
        for m, c in self.coefficients.items():
            if m >= 2:
                out += c * m * (m - 1) * rho ** (m - 2)
        return out

    def monotone(self):
        """True when p' >= 0 on (0, inf) for the built-in kinds."""
        if self.kind == "power":
            return True
        if self.kind == "zero":
            return True
        return all(c >= 0 for c in self.coefficients.values())

    # -- internal energy potential ---------------------------------

    def internal_energy(self, rho):
        """P(rho) = rho * integral_1^rho p(z)/z^2 dz, limit 0 at rho = 0."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise ValueError("internal energy needs rho >= 0")
        if self.kind == "zero":
            return np.zeros_like(rho)
        if self.kind == "power":
            return self.coeff * (rho**self.gamma - rho) / (self.gamma - 1.0)
        out = np.zeros_like(rho)
        for m, c in self.coefficients.items():
            if m == 1:
                with np.errstate(divide="ignore", invalid="ignore"):
                    term = np.where(rho > 0, c * rho * np.log(np.where(rho > 0, rho, 1.0)), 0.0)
                out += term
            else:
                out += c * (rho**m - rho) / (m - 1)
        return out

    def internal_energy_prime(self, rho):
        """P'(rho); satisfies P''(rho) = p'(rho)/rho."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(rho)
        if self.kind == "power":
            return self.coeff * (self.gamma * rho ** (self.gamma - 1.0) - 1.0) / (self.gamma - 1.0)
        out = np.zeros_like(rho)
        for m, c in self.coefficients.items():
            if m == 1:
                out += c * (np.log(rho) + 1.0)
            else:
                out += c * (m * rho ** (m - 1) - 1.0) / (m - 1)
        return out

    def enthalpy(self, rho):
        """f with f'(rho) = p'(rho)/rho and f(1) = 0 (wave-equation nonlinearity)."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(rho)
        if self.kind == "power":
            gm = self.gamma
            if abs(gm - 1.0) < 1e-14:
                return self.coeff * np.log(rho)
            return self.coeff * gm * (rho ** (gm - 1.0) - 1.0) / (gm - 1.0)
        out = np.zeros_like(rho)
        for m, c in self.coefficients.items():
            if m == 1:
                out += c * np.log(rho)
            else:
                out += c * m * (rho ** (m - 1) - 1.0) / (m - 1)
        return out

    def __repr__(self):
        if self.kind == "power":
            return f"PressureLaw.power(gamma={self.gamma}, coeff={self.coeff})"
        if self.kind == "zero":
            return "PressureLaw.zero()"
        return f"PressureLaw.polynomial({self.coefficients})"


def internal_energy_P(law, rho):
    return law.internal_energy(rho)


def relative_pressure_gap(law, rho, r):
    """Second-order Taylor gap P(rho) - P'(r)(rho - r) - P(r); >= 0 for convex P."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("relative pressure gap needs a positive base point r")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("relative pressure gap needs rho >= 0")
    return law.internal_energy(rho) - law.internal_energy_prime(r) * (rho - r) - law.internal_energy(r)


class CapillarityLaw:
    """Capillarity coefficient K(rho) and chi(rho) = rho K(rho).

    kinds:
      constant-K(kbar > 0):  K = kbar, chi = kbar rho (capillary fluid)
      quantum(hbar > 0):     chi = hbar^hbar_power / 4 constant (quantum fluid);
                             hbar_power defaults to 2, the exponent consistent
                             with the wave-equation form of the model
      constant-chi(c > 0):   chi = c constant
      zero:                  chi = 0 (degenerate; transport / convergence tests)
      custom:                user-supplied callables K, K', chi, chi'
    """

    def __init__(self, kind, value=None, hbar=None, hbar_power=2, funcs=None):
        self.kind = kind
        if kind == "constant-K":
            if value is None or value <= 0:
                raise ValueError("constant-K law needs kbar > 0")
            self.kbar = float(value)
        elif kind == "quantum":
            if hbar is None or hbar <= 0:
                raise ValueError("quantum law needs hbar > 0")
            self.hbar = float(hbar)
            self.hbar_power = float(hbar_power)
            self.chi_const = self.hbar**self.hbar_power / 4.0
        elif kind == "constant-chi":
            if value is None or value <= 0:
                raise ValueError("constant-chi law needs a positive constant")
            self.chi_const = float(value)
        elif kind == "zero":
            pass
        elif kind == "custom":
            self.funcs = funcs
        else:
            raise ValueError(f"unknown capillarity kind {kind!r}")

    @classmethod
    def constant_K(cls, kbar):
        return cls("constant-K", value=kbar)

    @classmethod
    def quantum(cls, hbar, hbar_power=2):
        return cls("quantum", hbar=hbar, hbar_power=hbar_power)

    @classmethod
    def constant_chi(cls, c):
        return cls("constant-chi", value=c)

    @classmethod
    def zero(cls):
        return cls("zero")

    def K(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "constant-K":
            return np.full_like(rho, self.kbar)
        if self.kind in ("quantum", "constant-chi"):
            return self.chi_const / rho
        if self.kind == "zero":
            return np.zeros_like(rho)
        return np.asarray(self.funcs["K"](rho), dtype=float)

    def K_prime(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "constant-K":
            return np.zeros_like(rho)
        if self.kind in ("quantum", "constant-chi"):
            return -self.chi_const / rho**2
        if self.kind == "zero":
            return np.zeros_like(rho)
        return np.asarray(self.funcs["K_prime"](rho), dtype=float)

    def chi(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "constant-K":
            return self.kbar * rho
        if self.kind in ("quantum", "constant-chi"):
            return np.full_like(rho, self.chi_const)
        if self.kind == "zero":
            return np.zeros_like(rho)
        return np.asarray(self.funcs["chi"](rho), dtype=float)

    def chi_prime(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "constant-K":
            return np.full_like(rho, self.kbar)
        if self.kind in ("quantum", "constant-chi", "zero"):
            return np.zeros_like(rho)
        return np.asarray(self.funcs["chi_prime"](rho), dtype=float)

    def is_constant_K(self):
        return self.kind == "constant-K"

    def __repr__(self):
        if self.kind == "constant-K":
            return f"CapillarityLaw.constant_K({self.kbar})"
        if self.kind == "quantum":
            return f"CapillarityLaw.quantum(hbar={self.hbar}, hbar_power={self.hbar_power})"
        if self.kind == "constant-chi":
            return f"CapillarityLaw.constant_chi({self.chi_const})"
        return f"CapillarityLaw({self.kind!r})"
