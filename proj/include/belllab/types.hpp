#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "belllab/errors.hpp"

namespace belllab {

/// Polarizer orientation in degrees, canonicalized to [0, 180).
/// Orientations that differ by a multiple of 180 degrees select the same
/// basis and compare equal.
class Angle {
public:
    Angle() = default;
    explicit Angle(double deg) : deg_(normalize(deg)) {}

    double degrees() const { return deg_; }
    double radians() const { return deg_ * kPi / 180.0; }

    static double normalize(double deg) {
        if (!std::isfinite(deg)) throw DomainError("Angle: degrees must be finite");
        double r = std::fmod(deg, 180.0);
        if (r < 0.0) r += 180.0;
        if (r == 180.0) r = 0.0; // fmod may round up at the seam
        return r;
    }

    friend bool operator==(const Angle& a, const Angle& b) { return a.deg_ == b.deg_; }
    friend auto operator<=>(const Angle& a, const Angle& b) { return a.deg_ <=> b.deg_; }

private:
    static constexpr double kPi = 3.14159265358979323846;
    double deg_ = 0.0;
};

enum class Side : std::uint8_t { Left = 0, Right = 1 };
enum class Slot : std::uint8_t { Unprimed = 0, Primed = 1 };

inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }
inline const char* to_string(Slot s) { return s == Slot::Unprimed ? "unprimed" : "primed"; }

/// One of the four measurement settings of an experiment: which wing,
/// which of its two slots, and the angle wired to that slot.
struct SettingLabel {
    Side side = Side::Left;
    Slot slot = Slot::Unprimed;
    Angle angle;

    friend bool operator==(const SettingLabel&, const SettingLabel&) = default;
};

/// The four angles of one experiment, keyed by (side, slot). Guarantees the
/// four labels carry distinct (side, slot) pairs by construction.
struct SettingSet {
    Angle left_unprimed;
    Angle left_primed;
    Angle right_unprimed;
    Angle right_primed;

    SettingLabel label(Side side, Slot slot) const {
        return SettingLabel{side, slot, angle(side, slot)};
    }

    Angle angle(Side side, Slot slot) const {
        if (side == Side::Left)
            return slot == Slot::Unprimed ? left_unprimed : left_primed;
        return slot == Slot::Unprimed ? right_unprimed : right_primed;
    }

    friend bool operator==(const SettingSet&, const SettingSet&) = default;
};

/// Canonical demonstration angles: 0/45 on the left, 22.5/-22.5 on the right.
inline SettingSet canonical_settings() {
    return SettingSet{Angle{0.0}, Angle{45.0}, Angle{22.5}, Angle{-22.5}};
}

/// Binary measurement result, encoded 0/1 so expectations read as
/// probabilities directly.
struct Outcome {
    std::uint8_t bit = 0;

    constexpr Outcome() = default;
    constexpr explicit Outcome(int b) : bit(static_cast<std::uint8_t>(b)) {
        if (b != 0 && b != 1) throw DomainError("Outcome: bit must be 0 or 1");
    }

    friend bool operator==(const Outcome&, const Outcome&) = default;
};

using OutcomePair = std::pair<Outcome, Outcome>;

/// Index 0..3 of a setting pair, left slot major:
///   0 = (a, b), 1 = (a, b'), 2 = (a', b), 3 = (a', b').
struct PairIndex {
    static constexpr int count = 4;

    static int of(Slot left, Slot right) {
        return 2 * static_cast<int>(left) + static_cast<int>(right);
    }
    static Slot left_slot(int pair) { return static_cast<Slot>((pair >> 1) & 1); }
    static Slot right_slot(int pair) { return static_cast<Slot>(pair & 1); }
};

/// One experimental run in probability space 1: the chosen settings and the
/// two observed outcomes.
struct TrialRecord {
    std::size_t trial_index = 0;
    SettingLabel alpha; // left wing
    SettingLabel beta;  // right wing
    Outcome a;
    Outcome b;

    int pair_index() const { return PairIndex::of(alpha.slot, beta.slot); }

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Probability-space-2 ground truth: what each wing would answer at both of
/// its settings. Exists only for sources that assign both values per side.
struct CounterfactualQuadruple {
    Outcome a_unprimed;
    Outcome a_primed;
    Outcome b_unprimed;
    Outcome b_primed;

    Outcome left(Slot slot) const { return slot == Slot::Unprimed ? a_unprimed : a_primed; }
    Outcome right(Slot slot) const { return slot == Slot::Unprimed ? b_unprimed : b_primed; }

    /// Dense index, (a, a', b, b') bits packed high to low: 8a + 4a' + 2b + b'.
    int index() const {
        return 8 * a_unprimed.bit + 4 * a_primed.bit + 2 * b_unprimed.bit + b_primed.bit;
    }

    static CounterfactualQuadruple from_index(int idx) {
        if (idx < 0 || idx > 15) throw DomainError("CounterfactualQuadruple: index must be in [0, 15]");
        return CounterfactualQuadruple{Outcome{(idx >> 3) & 1}, Outcome{(idx >> 2) & 1},
                                       Outcome{(idx >> 1) & 1}, Outcome{idx & 1}};
    }

    friend bool operator==(const CounterfactualQuadruple&, const CounterfactualQuadruple&) = default;
};

} // namespace belllab
