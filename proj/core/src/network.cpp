#include "sscert/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace sscert {

std::string_view to_string(BusKind kind) {
    switch (kind) {
        case BusKind::slack: return "slack";
        case BusKind::generator: return "generator";
        case BusKind::load: return "load";
    }
    return "unknown";
}

ParseError::ParseError(std::string message, std::size_t line, std::size_t column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

std::size_t PowerNetwork::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].kind == BusKind::slack) return i;
    }
    throw NetworkError("network has no slack bus");
}

std::optional<std::size_t> PowerNetwork::find(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    return std::nullopt;
}

std::size_t PowerNetwork::index_of(int id) const {
    if (auto idx = find(id)) return *idx;
    throw NetworkError("unknown bus id " + std::to_string(id));
}

void PowerNetwork::validate() const {
    if (buses.empty()) throw NetworkError("network has no buses");
    const auto slacks = std::count_if(buses.begin(), buses.end(),
                                      [](const Bus& b) { return b.kind == BusKind::slack; });
    if (slacks != 1) {
        throw NetworkError("network must have exactly one slack bus, found " + std::to_string(slacks));
    }
    for (std::size_t e = 0; e < branches.size(); ++e) {
        const auto& br = branches[e];
        if (br.from >= buses.size() || br.to >= buses.size()) {
            throw NetworkError("branch " + std::to_string(e) + " references a missing bus");
        }
        if (br.from == br.to) throw NetworkError("branch " + std::to_string(e) + " is a self loop");
        if (!std::isfinite(br.y_series.real()) || !std::isfinite(br.y_series.imag()) ||
            !std::isfinite(br.b_charging)) {
            throw NetworkError("branch " + std::to_string(e) + " has a non-finite admittance");
        }
        if (!(br.tap > 0.0)) throw NetworkError("branch " + std::to_string(e) + " has a non-positive tap");
    }
    std::vector<std::vector<std::size_t>> adj(buses.size());
    for (const auto& br : branches) {
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }
    std::vector<bool> seen(buses.size(), false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const auto k = frontier.front();
        frontier.pop();
        for (auto l : adj[k]) {
            if (!seen[l]) {
                seen[l] = true;
                ++reached;
                frontier.push(l);
            }
        }
    }
    if (reached != buses.size()) {
        throw NetworkError("network is disconnected: " + std::to_string(buses.size() - reached) +
                           " of " + std::to_string(buses.size()) + " buses unreachable");
    }
}

namespace {

struct Matrix {
    std::vector<std::vector<double>> rows;
    std::size_t line = 0;
    std::size_t column = 0;
};

// Reads the subset of MATLAB syntax used by MATPOWER case files: a function
// header, `mpc.<field> = <value>;` assignments, `%` comments.
class CaseReader {
public:
    explicit CaseReader(std::string_view text) : text_(text) {}

    void run() {
        while (true) {
            skip_blank(true);
            if (at_end()) break;
            if (starts_with("function")) {
                skip_line();
                continue;
            }
            const auto line = line_;
            const auto col = col_;
            auto name = read_identifier();
            if (name.empty()) fail("expected an assignment");
            skip_blank(false);
            if (peek() != '=') fail("expected '=' after " + name);
            advance();
            skip_blank(false);
            read_value(name, line, col);
            skip_blank(false);
            if (!at_end() && peek() == ';') advance();
        }
    }

    std::map<std::string, Matrix> matrices;
    std::map<std::string, double> scalars;

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, col_); }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    bool starts_with(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_line() {
        while (!at_end() && peek() != '\n') advance();
    }

    // Skips whitespace and comments; newlines are consumed only when asked.
    void skip_blank(bool newlines) {
        while (!at_end()) {
            const char c = peek();
            if (c == '%') {
                skip_line();
            } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
                advance();
            } else if (c == '.' && starts_with("...")) {
                skip_line();  // MATLAB continuation
                if (!at_end()) advance();
            } else {
                break;
            }
        }
    }

    std::string read_identifier() {
        std::string out;
        while (!at_end()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
                out.push_back(c);
                advance();
            } else {
                break;
            }
        }
        return out;
    }

    void read_value(const std::string& name, std::size_t line, std::size_t col) {
        if (at_end()) fail("missing value for " + name);
        const char c = peek();
        if (c == '[') {
            auto m = read_matrix();
            m.line = line;
            m.column = col;
            matrices[name] = std::move(m);
        } else if (c == '{') {
            skip_group('{', '}');
        } else if (c == '\'' || c == '"') {
            skip_string(c);
        } else {
            scalars[name] = read_number();
        }
    }

    void skip_string(char quote) {
        advance();
        while (!at_end() && peek() != quote) {
            if (peek() == '\n') fail("unterminated string");
            advance();
        }
        if (at_end()) fail("unterminated string");
        advance();
    }

    void skip_group(char open, char close) {
        int depth = 0;
        while (!at_end()) {
            const char c = peek();
            if (c == '%') {
                skip_line();
                continue;
            }
            if (c == '\'') {
                skip_string(c);
                continue;
            }
            advance();
            if (c == open) ++depth;
            if (c == close && --depth == 0) return;
        }
        fail(std::string("unterminated '") + open + "'");
    }

    double read_number() {
        const auto start = pos_;
        bool negative = false;
        if (peek() == '-' || peek() == '+') {
            negative = peek() == '-';
            advance();
        }
        if (starts_with("Inf") || starts_with("inf")) {
            for (int i = 0; i < 3; ++i) advance();
            return negative ? -std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::infinity();
        }
        if (starts_with("NaN") || starts_with("nan")) {
            for (int i = 0; i < 3; ++i) advance();
            return std::numeric_limits<double>::quiet_NaN();
        }
        const auto digits_begin = pos_;
        while (!at_end()) {
            const char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
                ((c == '-' || c == '+') && pos_ > digits_begin &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))) {
                advance();
            } else {
                break;
            }
        }
        double value = 0.0;
        const char* first = text_.data() + digits_begin;
        const char* last = text_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || first == last) {
            pos_ = start;
            fail("invalid number");
        }
        return negative ? -value : value;
    }

    Matrix read_matrix() {
        advance();  // '['
        Matrix m;
        std::vector<double> row;
        auto flush = [&] {
            if (!row.empty()) m.rows.push_back(std::move(row));
            row.clear();
        };
        while (true) {
            skip_blank(false);
            if (at_end()) fail("unterminated matrix");
            const char c = peek();
            if (c == ']') {
                advance();
                flush();
                return m;
            }
            if (c == ';' || c == '\n') {
                advance();
                flush();
            } else if (c == ',') {
                advance();
            } else {
                row.push_back(read_number());
            }
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

constexpr double kDeg = std::numbers::pi / 180.0;

const Matrix& require_table(const CaseReader& reader, const std::string& name, std::size_t min_cols) {
    auto it = reader.matrices.find(name);
    if (it == reader.matrices.end()) throw ParseError("missing required table " + name, 0, 0);
    for (std::size_t r = 0; r < it->second.rows.size(); ++r) {
        if (it->second.rows[r].size() < min_cols) {
            throw ParseError(name + " row " + std::to_string(r + 1) + " has " +
                                 std::to_string(it->second.rows[r].size()) + " columns, need " +
                                 std::to_string(min_cols),
                             it->second.line, it->second.column);
        }
    }
    return it->second;
}

}  // namespace

PowerNetwork parse_matpower(std::string_view text) {
    CaseReader reader(text);
    reader.run();

    auto base_it = reader.scalars.find("mpc.baseMVA");
    if (base_it == reader.scalars.end()) throw ParseError("missing required field mpc.baseMVA", 0, 0);
    const double base = base_it->second;
    if (!(base > 0.0)) throw NetworkError("baseMVA must be positive");

    const auto& bus_tab = require_table(reader, "mpc.bus", 13);
    const auto& gen_tab = require_table(reader, "mpc.gen", 10);
    const auto& br_tab = require_table(reader, "mpc.branch", 11);

    PowerNetwork net;
    net.base_mva = base;

    std::unordered_map<int, std::size_t> index;
    std::unordered_map<int, int> bus_type;
    for (const auto& r : bus_tab.rows) {
        const int id = static_cast<int>(r[0]);
        const int type = static_cast<int>(r[1]);
        if (bus_type.contains(id)) throw NetworkError("duplicate bus id " + std::to_string(id));
        bus_type[id] = type;
        if (type == 4) continue;  // isolated
        Bus b;
        b.id = id;
        b.kind = type == 3 ? BusKind::slack : (type == 2 ? BusKind::generator : BusKind::load);
        b.p_spec = -r[2] / base;
        b.q_spec = -r[3] / base;
        b.shunt = Complex(r[4], r[5]) / base;
        b.v_init = r[7];
        b.theta_init = r[8] * kDeg;
        b.v_set = r[7];
        b.v_max = r[11];
        b.v_min = r[12];
        index[id] = net.buses.size();
        net.buses.push_back(b);
    }

    // Aggregate in-service generators per bus.
    struct GenSum {
        double p = 0, q = 0, pmin = 0, pmax = 0, qmin = 0, qmax = 0, vg = 0;
        int count = 0;
    };
    std::vector<GenSum> gens(net.buses.size());
    for (const auto& r : gen_tab.rows) {
        if (r[7] <= 0) continue;
        const int id = static_cast<int>(r[0]);
        auto it = index.find(id);
        if (it == index.end()) {
            if (bus_type.contains(id)) continue;  // generator on an isolated bus
            throw NetworkError("generator references missing bus " + std::to_string(id));
        }
        auto& g = gens[it->second];
        if (g.count == 0) g.vg = r[5];
        ++g.count;
        g.p += r[1] / base;
        g.q += r[2] / base;
        g.qmax += r[3] / base;
        g.qmin += r[4] / base;
        g.pmax += r[8] / base;
        g.pmin += r[9] / base;
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        auto& b = net.buses[i];
        const auto& g = gens[i];
        if (g.count == 0) {
            if (b.kind == BusKind::generator) b.kind = BusKind::load;
            continue;
        }
        b.has_generator = true;
        const double pd = -b.p_spec;
        const double qd = -b.q_spec;
        b.p_spec += g.p;
        b.q_spec += g.q;
        b.p_min = g.pmin - pd;
        b.p_max = g.pmax - pd;
        b.q_min = g.qmin - qd;
        b.q_max = g.qmax - qd;
        if (b.kind != BusKind::load) b.v_set = g.vg;
    }

    for (std::size_t k = 0; k < br_tab.rows.size(); ++k) {
        const auto& r = br_tab.rows[k];
        const int f = static_cast<int>(r[0]);
        const int t = static_cast<int>(r[1]);
        for (int id : {f, t}) {
            if (!bus_type.contains(id)) {
                throw NetworkError("branch " + std::to_string(k + 1) + " references missing bus " +
                                   std::to_string(id));
            }
        }
        if (r[10] <= 0) continue;
        if (!index.contains(f) || !index.contains(t)) continue;  // touches an isolated bus
        Branch br;
        br.from = index[f];
        br.to = index[t];
        br.y_series = 1.0 / Complex(r[2], r[3]);
        br.b_charging = r[4];
        if (r[5] > 0) br.s_max = r[5] / base;
        br.tap = r[8] == 0.0 ? 1.0 : r[8];
        br.shift = r[9] * kDeg;
        if (r.size() >= 13) {
            br.angle_min = r[11] * kDeg;
            br.angle_max = r[12] * kDeg;
        }
        net.branches.push_back(br);
    }

    net.validate();
    return net;
}

PowerNetwork load_matpower(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open case file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_matpower(ss.str());
}

BranchAdmittance branch_admittance(const Branch& br) {
    const Complex tap = std::polar(br.tap, br.shift);
    const Complex ytt = br.y_series + Complex(0.0, br.b_charging / 2.0);
    return {ytt / std::norm(tap), -br.y_series / std::conj(tap), -br.y_series / tap, ytt};
}

EdgeAdmittanceStructure build_edge_admittances(const PowerNetwork& net) {
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    const auto m = static_cast<Eigen::Index>(net.branch_count());
    EdgeAdmittanceStructure out;
    out.y_d = Eigen::VectorXcd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) out.y_d[k] = net.buses[static_cast<std::size_t>(k)].shunt;

    std::vector<Eigen::Triplet<Complex>> yf, yt;
    yf.reserve(net.branch_count());
    yt.reserve(net.branch_count());
    out.branch.reserve(net.branch_count());
    for (std::size_t e = 0; e < net.branch_count(); ++e) {
        const auto& br = net.branches[e];
        const auto ba = branch_admittance(br);
        out.y_d[static_cast<Eigen::Index>(br.from)] += ba.yff;
        out.y_d[static_cast<Eigen::Index>(br.to)] += ba.ytt;
        yf.emplace_back(static_cast<int>(br.from), static_cast<int>(e), ba.yft);
        yt.emplace_back(static_cast<int>(br.to), static_cast<int>(e), ba.ytf);
        out.branch.push_back(ba);
    }
    out.Yf.resize(n, m);
    out.Yt.resize(n, m);
    out.Yf.setFromTriplets(yf.begin(), yf.end());
    out.Yt.setFromTriplets(yt.begin(), yt.end());
    return out;
}

Eigen::SparseMatrix<Complex> bus_admittance_matrix(const PowerNetwork& net,
                                                   const EdgeAdmittanceStructure& adm) {
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(n) + 2 * net.branch_count());
    for (Eigen::Index k = 0; k < n; ++k) trip.emplace_back(static_cast<int>(k), static_cast<int>(k), adm.y_d[k]);
    for (int e = 0; e < adm.Yf.outerSize(); ++e) {
        const auto& br = net.branches[static_cast<std::size_t>(e)];
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(adm.Yf, e); it; ++it) {
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(br.to), it.value());
        }
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(adm.Yt, e); it; ++it) {
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(br.from), it.value());
        }
    }
    Eigen::SparseMatrix<Complex> y(n, n);
    y.setFromTriplets(trip.begin(), trip.end());
    return y;
}

}  // namespace sscert
