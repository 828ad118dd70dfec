#pragma once

#include "etas/error.hpp"
#include "etas/mle.hpp"
#include "etas/nonstationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace etas {

/// One nonstationary configuration: restriction 1/2/3, domain a/b, prime = change point.
struct ModelSpec {
    Restriction restriction{Restriction::free};
    SmoothingDomain domain{SmoothingDomain::ordinary};
    bool changepoint{false};

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

[[nodiscard]] inline std::string model_name(const ModelSpec& m) {
    std::string s;
    s += m.restriction == Restriction::fix_qk ? '1' : m.restriction == Restriction::tied ? '2' : '3';
    s += m.domain == SmoothingDomain::ordinary ? 'a' : 'b';
    if (m.changepoint) s += '\'';
    return s;
}

/// Filesystem-friendly form: 3a' -> 3a_cp.
[[nodiscard]] inline std::string model_stem(const ModelSpec& m) {
    std::string s = model_name(m);
    if (m.changepoint) s.back() = '_', s += "cp";
    return s;
}

/// The twelve configurations, in table order: 1a 1b 2a 2b 3a 3b, then the primed ones.
[[nodiscard]] inline std::vector<ModelSpec> all_models() {
    std::vector<ModelSpec> out;
    for (bool cp : {false, true})
        for (Restriction r : {Restriction::fix_qk, Restriction::tied, Restriction::free})
            for (SmoothingDomain d : {SmoothingDomain::ordinary, SmoothingDomain::transformed})
                out.push_back({r, d, cp});
    return out;
}

[[nodiscard]] inline ModelSpec parse_model(std::string_view text) {
    const std::string original(text);
    text = io::trim(text);
    ModelSpec m;
    auto bad = [&]() { fail(ErrorKind::parse, "unknown model '" + original + "' (expected e.g. 1a, 2b', 3a_cp)"); };
    if (text.size() < 2) bad();
    switch (text[0]) {
        case '1': m.restriction = Restriction::fix_qk; break;
        case '2': m.restriction = Restriction::tied; break;
        case '3': m.restriction = Restriction::free; break;
        default: bad();
    }
    switch (text[1]) {
        case 'a': m.domain = SmoothingDomain::ordinary; break;
        case 'b': m.domain = SmoothingDomain::transformed; break;
        default: bad();
    }
    const std::string_view rest = text.substr(2);
    if (rest.empty()) return m;
    if (rest == "'" || rest == "\xE2\x80\xB2" || rest == "_cp" || rest == "p") {
        m.changepoint = true;
        return m;
    }
    bad();
    return m;
}

/// "all" or a comma-separated list; duplicates are dropped, order kept.
[[nodiscard]] inline std::vector<ModelSpec> parse_model_list(std::string_view text) {
    if (io::trim(text) == "all") return all_models();
    std::vector<ModelSpec> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        const auto m = parse_model(item);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct ScoreRow {
    std::string name;
    double abic{0.0};
    double delta_abic{0.0};
    double relative_probability{0.0};  // exp(-(dABIC - min dABIC)/2)
    bool winner{false};
};

struct Scoreboard {
    std::vector<ScoreRow> rows;
    std::string winner;
};

/// Winner is the smallest delta ABIC; ties go to the first listed. Non-finite
/// entries never win and get probability 0.
[[nodiscard]] inline Scoreboard make_scoreboard(std::vector<ScoreRow> rows) {
    Scoreboard out;
    double best = std::numeric_limits<double>::infinity();
    std::size_t at = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (std::isfinite(rows[i].delta_abic) && rows[i].delta_abic < best) best = rows[i].delta_abic, at = i;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        r.winner = i == at;
        r.relative_probability =
            at < rows.size() && std::isfinite(r.delta_abic) ? relative_probability(r.delta_abic - best) : 0.0;
    }
    if (at < rows.size()) out.winner = rows[at].name;
    out.rows = std::move(rows);
    return out;
}

}  // namespace etas
