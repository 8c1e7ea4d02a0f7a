#include "cmt/descriptor.hpp"

namespace cmt {

const char* kind_name(LevelKind k) {
    switch (k) {
        case LevelKind::T00: return "00";
        case LevelKind::T0: return "0";
        case LevelKind::T1a: return "1a";
        case LevelKind::T1b: return "1b";
    }
    return "?";
}

LevelKind kind_from_name(const std::string& s) {
    if (s == "00") return LevelKind::T00;
    if (s == "0") return LevelKind::T0;
    if (s == "1a") return LevelKind::T1a;
    if (s == "1b") return LevelKind::T1b;
    throw error(errc::bad_input, "unknown level kind", {{"kind", s}});
}

std::string OneColoredDescriptor::str() const {
    return std::string(kind_name(kind)) + color.str();
}

std::string Descriptor::str() const {
    std::string s;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) s += "*";
        s += levels[i].str();
    }
    if (branch_variant) s += "[V]";
    return s;
}

OneColoredDescriptor level(LevelKind k, ExtCard m, ExtCard mu) {
    return {k, {m, mu}};
}

Descriptor single(LevelKind k, ExtCard m, ExtCard mu) {
    Descriptor d;
    d.levels.push_back(level(k, m, mu));
    return d;
}

Descriptor composite(std::vector<OneColoredDescriptor> levels) {
    Descriptor d;
    d.levels = std::move(levels);
    return d;
}

namespace {

bool level_color_ok(const OneColoredDescriptor& l) {
    switch (l.kind) {
        case LevelKind::T00: return l.color.m == 0 && l.color.mu == 0;
        case LevelKind::T0: return l.color.m >= 2 && l.color.mu == 0;
        case LevelKind::T1a: return l.color.m == 0 && l.color.mu >= 2;
        case LevelKind::T1b: return l.color.m >= 1 && l.color.mu >= 1;
    }
    return false;
}

// window match offsets for the two collapse patterns; -1 when none applies
int collapse_at(const std::vector<OneColoredDescriptor>& ls, std::size_t i) {
    if (i + 1 < ls.size() && ls[i].kind == LevelKind::T1b &&
        ls[i + 1].kind == LevelKind::T1a &&
        ls[i + 1].color.mu == ls[i].color.m + ls[i].color.mu)
        return 1;
    if (i + 2 < ls.size() && ls[i].kind == LevelKind::T1a &&
        ls[i + 1].kind == LevelKind::T0 && ls[i + 2].kind == LevelKind::T1a &&
        ls[i].color.mu == ls[i + 1].color.m && ls[i + 1].color.m == ls[i + 2].color.mu)
        return 2;
    return -1;
}

}  // namespace

DescriptorReport validate_structural(const Descriptor& d) {
    DescriptorReport rep;
    if (d.levels.empty()) {
        rep.violations.push_back({"levels-nonempty", json::object()});
        return rep;
    }
    for (std::size_t i = 0; i < d.levels.size(); ++i) {
        const auto& l = d.levels[i];
        if (!level_color_ok(l))
            rep.violations.push_back(
                {"level-color",
                 {{"index", i}, {"kind", kind_name(l.kind)}, {"color", l.color}}});
        if (l.kind == LevelKind::T00 && d.levels.size() > 1)
            rep.violations.push_back({"singleton-level", {{"index", i}}});
    }
    for (std::size_t i = 0; i + 1 < d.levels.size(); ++i)
        if (d.levels[i].kind == LevelKind::T1a && d.levels[i + 1].kind != LevelKind::T0)
            rep.violations.push_back({"adjacency", {{"index", i}}});
    if (d.branch_variant) {
        const auto& first = d.levels.front();
        if ((first.kind != LevelKind::T1a && first.kind != LevelKind::T1b) ||
            first.color.mu == 0)
            rep.violations.push_back(
                {"branch-variant-base", {{"first_level", first.str()}}});
    }
    return rep;
}

DescriptorReport validate(const Descriptor& d) {
    DescriptorReport rep = validate_structural(d);
    if (!rep.ok()) return rep;
    for (std::size_t i = 0; i < d.levels.size(); ++i) {
        int span = collapse_at(d.levels, i);
        if (span > 0)
            rep.violations.push_back(
                {"normal-form", {{"index", i}, {"window", span + 1}}});
    }
    return rep;
}

std::optional<std::pair<std::size_t, std::size_t>> first_collapse_window(
    const std::vector<OneColoredDescriptor>& levels) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        int span = collapse_at(levels, i);
        if (span > 0) return std::make_pair(i, i + static_cast<std::size_t>(span) + 1);
    }
    return std::nullopt;
}

Descriptor normalize(const Descriptor& d) {
    auto rep = validate_structural(d);
    if (!rep.ok()) {
        json v = json::array();
        for (auto& viol : rep.violations)
            v.push_back({{"clause", viol.clause}, {"witness", viol.witness}});
        throw error(errc::bad_descriptor, "descriptor is not well formed",
                    {{"violations", v}});
    }
    Descriptor out = d;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < out.levels.size(); ++i) {
            int span = collapse_at(out.levels, i);
            if (span > 0) {
                // the merged level equals the last level of the window
                out.levels.erase(out.levels.begin() + static_cast<std::ptrdiff_t>(i),
                                 out.levels.begin() + static_cast<std::ptrdiff_t>(i + span));
                changed = true;
                break;
            }
        }
    }
    return out;
}

int depth(const Descriptor& d) { return static_cast<int>(normalize(d).levels.size()); }

OneColoredDescriptor first_level(const Descriptor& d) { return normalize(d).levels.front(); }

std::optional<Descriptor> tail(const Descriptor& d) {
    Descriptor n = normalize(d);
    if (n.levels.size() <= 1) return std::nullopt;
    Descriptor t;
    t.levels.assign(n.levels.begin() + 1, n.levels.end());
    return t;
}

bool descriptor_equal(const Descriptor& a, const Descriptor& b) {
    return normalize(a) == normalize(b);
}

void to_json(json& j, const OneColoredDescriptor& d) {
    j = {{"kind", kind_name(d.kind)}, {"m", d.color.m}, {"mu", d.color.mu}};
}

void from_json(const json& j, OneColoredDescriptor& d) {
    d.kind = kind_from_name(j.at("kind").get<std::string>());
    d.color.m = j.value("m", json(0)).get<ExtCard>();
    d.color.mu = j.value("mu", json(0)).get<ExtCard>();
}

void to_json(json& j, const Descriptor& d) {
    j = {{"levels", d.levels}, {"branch_variant", d.branch_variant}};
}

void from_json(const json& j, Descriptor& d) {
    d.levels = j.at("levels").get<std::vector<OneColoredDescriptor>>();
    d.branch_variant = j.value("branch_variant", false);
}

}  // namespace cmt
