"""Smoke test for the ibc_lab extension module.

Build and install first, e.g.

    pip install maturin
    cd crates/py && maturin develop --release

or copy target/release/libibc_lab.so to ibc_lab.so somewhere on sys.path.
"""

import json
import math
import tempfile

import ibc_lab


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    assert close(ibc_lab.gamma_m(0.5), -9.1298e-5, 1e-4)
    assert abs(ibc_lab.gamma_m(1e6)) < 1e-12
    assert close(ibc_lab.b_coefficient(0.5), 0.5 / (4 * math.pi), 1e-12)
    assert close(ibc_lab.arctan_convolution(0.5, 1.0, 2.0, 1.0), 2.812, 1e-3)

    psi = ibc_lab.RadialTestFunction(1.0)
    assert close(psi.value_at_center(), 0.42378, 1e-4)
    b = ibc_lab.extract_b(0.5, psi)
    assert close(b.value, psi.value_at_center(), 1e-2), b
    a = ibc_lab.extract_a(0.5, psi)
    td = ibc_lab.td_position_value(0.5, psi)
    assert close(a.value, td.value, 1e-2), (a, td)
    probe = ibc_lab.apply_g_probe(0.5, psi, 1e-3)
    assert close(probe.value * 1e-3, -0.016864, 1e-2), probe
    assert probe.method == "adaptive"

    e_t = ibc_lab.renormalized_fiber_energy(0.5)
    e_q = ibc_lab.renormalized_fiber_energy(0.5, "subtracted_quadrature")
    assert abs(e_t - 0.0277418) < 1e-6 and abs(e_t - e_q) < 1e-6
    slope, _, _ = ibc_lab.divergence_fit(0.5, [1e2, 2e2, 5e2, 1e3, 2e3, 5e3, 1e4, 2e4, 5e4, 1e5])
    assert close(slope, -0.0253303, 5e-3)

    lam, lam_prime = ibc_lab.schur_constants(0.5, 4, 0.1)
    assert lam.value <= 4 * math.pi / 0.8 and lam_prime.value > 0
    assert ibc_lab.gbound_constant(0.5, 3, 0.1).value > 0

    try:
        ibc_lab.RadialTestFunction(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative width accepted")

    with tempfile.TemporaryDirectory() as out:
        report = json.loads(ibc_lab.run("experiment = constants\nmc.samples = 20000\n", out))
        assert report["schema_version"] == 1
        assert report["passed"], report

    print("ibc_lab smoke test passed")


if __name__ == "__main__":
    main()
