"""Daubechies orthonormal filter banks (extremal phase, 2 to 8 vanishing moments)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Low-pass taps u_0..u_{2N-1}, normalized so that sum(u) = sqrt(2).
_DAUBECHIES_LOW_PASS = {
    2: (
        0.48296291314453414337,
        0.83651630373780790558,
        0.22414386804201338103,
        -0.12940952255126038117,
    ),
    3: (
        0.33267055295008261600,
        0.80689150931109257649,
        0.45987750211849157010,
        -0.13501102001025458870,
        -0.085441273882026661693,
        0.035226291885709536603,
    ),
    4: (
        0.23037781330889650086,
        0.71484657055291564709,
        0.63088076792985890788,
        -0.027983769416859854211,
        -0.18703481171909308408,
        0.030841381835560763627,
        0.032883011666885199735,
        -0.010597401785069032105,
    ),
    5: (
        0.16010239797419291448,
        0.60382926979718967054,
        0.72430852843777292773,
        0.13842814590132073151,
        -0.24229488706638203186,
        -0.032244869584638374648,
        0.077571493840045713523,
        -0.0062414902127982742742,
        -0.012580751999081999469,
        0.0033357252854737712780,
    ),
    6: (
        0.11154074335010946362,
        0.49462389039845308568,
        0.75113390802109535068,
        0.31525035170919762909,
        -0.22626469396543982008,
        -0.12976686756726193556,
        0.097501605587323049102,
        0.027522865530305728626,
        -0.031582039317486029565,
        0.00055384220116149613925,
        0.0047772575109455106396,
        -0.0010773010853084795649,
    ),
    7: (
        0.077852054085009179020,
        0.39653931948191730654,
        0.72913209084623511992,
        0.46978228740519312247,
        -0.14390600392856497541,
        -0.22403618499387498264,
        0.071309219266830264751,
        0.080612609151083071913,
        -0.038029936935014413580,
        -0.016574541630666880654,
        0.012550998556099840613,
        0.00042957797292136652113,
        -0.0018016407040474909153,
        0.00035371379997452024845,
    ),
    8: (
        0.054415842243104009955,
        0.31287159091429997066,
        0.67563073629728980681,
        0.58535468365420671277,
        -0.015829105256349305667,
        -0.28401554296154692652,
        0.00047248457391328277036,
        0.12874742662047845886,
        -0.017369301001807546170,
        -0.044088253930794751507,
        0.013981027917398281649,
        0.0087460940474057767164,
        -0.0048703529934515743104,
        -0.00039174037337694704630,
        0.00067544940645056936637,
        -0.00011747678412476953373,
    ),
}


@dataclass(frozen=True)
class WaveletFamily:
    """Compactly supported orthonormal wavelet given by its two-scale filters.

    ``support_length`` is ``T`` with ``supp(phi) = supp(psi) = [0, T]``, so the
    filters carry ``T + 1`` taps.
    """

    name: str
    vanishing_moments: int
    low_pass: np.ndarray = field(repr=False)
    high_pass: np.ndarray = field(repr=False)

    @property
    def taps(self) -> int:
        return len(self.low_pass)

    @property
    def support_length(self) -> int:
        return len(self.low_pass) - 1


def daubechies(order: int) -> WaveletFamily:
    if order not in _DAUBECHIES_LOW_PASS:
        raise DomainError(
            f"Daubechies order must be in 2..8 (W1 needs at least 2 vanishing moments), got {order}"
        )
    u = np.array(_DAUBECHIES_LOW_PASS[order], dtype=float)
    k = np.arange(len(u))
    v = (-1.0) ** k * u[::-1]
    u.setflags(write=False)
    v.setflags(write=False)
    return WaveletFamily(f"db{order}", order, u, v)


def get_family(name) -> WaveletFamily:
    """Resolve ``"db2"`` ... ``"db8"`` (or a bare order) to a :class:`WaveletFamily`."""
    if isinstance(name, WaveletFamily):
        return name
    if isinstance(name, int):
        return daubechies(name)
    text = str(name).strip().lower()
    if text.startswith("db") and text[2:].isdigit():
        return daubechies(int(text[2:]))
    raise DomainError(f"unknown wavelet family {name!r}; expected db2..db8")
