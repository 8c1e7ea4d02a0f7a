#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace cmt {

using json = nlohmann::json;

using NodeId = std::int32_t;
inline constexpr NodeId no_node = -1;

// Extended cardinal: a non-negative integer or infinity.  Addition absorbs
// infinity; comparison places infinity above every integer.
struct ExtCard {
    std::int64_t v = 0;  // -1 encodes infinity

    constexpr ExtCard() = default;
    constexpr ExtCard(std::int64_t n) : v(n) {}

    static constexpr ExtCard inf() { return ExtCard{-1}; }
    constexpr bool is_inf() const { return v < 0; }

    friend constexpr bool operator==(ExtCard a, ExtCard b) {
        return a.is_inf() == b.is_inf() && (a.is_inf() || a.v == b.v);
    }
    friend constexpr bool operator!=(ExtCard a, ExtCard b) { return !(a == b); }
    friend constexpr bool operator<(ExtCard a, ExtCard b) {
        if (a.is_inf()) return false;
        if (b.is_inf()) return true;
        return a.v < b.v;
    }
    friend constexpr bool operator<=(ExtCard a, ExtCard b) { return a < b || a == b; }
    friend constexpr bool operator>(ExtCard a, ExtCard b) { return b < a; }
    friend constexpr bool operator>=(ExtCard a, ExtCard b) { return b <= a; }
    friend constexpr ExtCard operator+(ExtCard a, ExtCard b) {
        if (a.is_inf() || b.is_inf()) return inf();
        return ExtCard{a.v + b.v};
    }

    std::string str() const { return is_inf() ? "inf" : std::to_string(v); }
};

inline void to_json(json& j, const ExtCard& c) {
    if (c.is_inf()) j = "inf";
    else j = c.v;
}
inline void from_json(const json& j, ExtCard& c) {
    if (j.is_string()) {
        if (j.get<std::string>() != "inf")
            throw std::runtime_error("bad extended cardinal: " + j.dump());
        c = ExtCard::inf();
    } else {
        c = ExtCard{j.get<std::int64_t>()};
        if (c.v < 0) throw std::runtime_error("negative cardinal");
    }
}

// Color of a node: (number of border cones, number of inner cones).
struct ColorPair {
    ExtCard m = 0;
    ExtCard mu = 0;

    friend constexpr bool operator==(const ColorPair& a, const ColorPair& b) {
        return a.m == b.m && a.mu == b.mu;
    }
    friend constexpr bool operator!=(const ColorPair& a, const ColorPair& b) { return !(a == b); }
    std::string str() const { return "(" + m.str() + "," + mu.str() + ")"; }
};

inline void to_json(json& j, const ColorPair& c) { j = json::array({c.m, c.mu}); }
inline void from_json(const json& j, ColorPair& c) {
    c.m = j.at(0).get<ExtCard>();
    c.mu = j.at(1).get<ExtCard>();
}

enum class errc {
    bad_input,          // malformed file / flag / schema
    not_a_leaf,
    not_comparable,
    not_antichain,
    not_good_tree,
    bad_descriptor,
    budget_exceeded,
    star_violated,      // extension condition (single isolation status)
    star2_violated,     // extension condition (rooted second operand required)
    star3_violated,     // extension condition (predecessor set convex)
    singleton_operand,
    witness_inconsistent,
    not_precolored,
    recognition_failure,
    constraints_failed,
    empty_input,
    internal,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::bad_input: return "bad-input";
        case errc::not_a_leaf: return "not-a-leaf";
        case errc::not_comparable: return "not-comparable";
        case errc::not_antichain: return "not-antichain";
        case errc::not_good_tree: return "not-good-tree";
        case errc::bad_descriptor: return "bad-descriptor";
        case errc::budget_exceeded: return "budget-exceeded";
        case errc::star_violated: return "condition-star";
        case errc::star2_violated: return "condition-star-star";
        case errc::star3_violated: return "condition-star-star-star";
        case errc::singleton_operand: return "singleton-operand";
        case errc::witness_inconsistent: return "witness-inconsistent";
        case errc::not_precolored: return "not-precolored";
        case errc::recognition_failure: return "recognition-failure";
        case errc::constraints_failed: return "constraints-failed";
        case errc::empty_input: return "empty-input";
        case errc::internal: return "internal";
    }
    return "unknown";
}

// Library-wide exception.  `detail` carries a machine-readable witness that the
// command-line front end prints as a JSON error object.
struct error : std::runtime_error {
    errc code;
    json detail;

    error(errc c, const std::string& msg, json d = json::object())
        : std::runtime_error(msg), code(c), detail(std::move(d)) {}
};

}  // namespace cmt
