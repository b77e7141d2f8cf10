#include "hyperstab/kernel_tables.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperstab/errors.hpp"

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace hyperstab {

int ContinuumKernelSet::seg_index(int i, int p) const {
    for (std::size_t s = 0; s < segments.size(); ++s)
        if (segments[s].first == i && segments[s].second == p) return static_cast<int>(s);
    throw GeometryError("no segment (" + std::to_string(i + 1) + "," + std::to_string(p + 1) + ")");
}

namespace {

struct Bilinear {
    int a0, b0;
    double wa, wb;
};

Bilinear locate(const SegmentGrid& g, double x, double xi) {
    double tx = x * (g.nx - 1);
    tx = std::clamp(tx, 0.0, static_cast<double>(g.nx - 1));
    int a0 = std::min(static_cast<int>(tx), g.nx - 2);
    const double wa = tx - a0;
    // consistent mapped coordinate: interpolate the bounding curves in x first
    const double lo = g.lo[static_cast<std::size_t>(a0)] * (1 - wa) + g.lo[static_cast<std::size_t>(a0) + 1] * wa;
    const double up = g.up[static_cast<std::size_t>(a0)] * (1 - wa) + g.up[static_cast<std::size_t>(a0) + 1] * wa;
    double r = (up - lo) < 1e-300 ? 0.0 : (xi - lo) / (up - lo);
    r = std::clamp(r, 0.0, 1.0);
    double tr = r * (g.nr - 1);
    int b0 = std::min(static_cast<int>(tr), g.nr - 2);
    const double wb = tr - b0;
    return {a0, b0, wa, wb};
}

} // namespace

double ContinuumKernelSet::eval_K_on_segment(int i, int p, double x, double xi, double y) const {
    const KTable& t = K[static_cast<std::size_t>(seg_index(i, p))];
    const auto q = locate(t.g, x, xi);
    auto yv = [&](int a, int b) {
        return ygrid.interp(std::span<const double>(t.row(a, b), static_cast<std::size_t>(t.nyn)), y);
    };
    return (1 - q.wa) * ((1 - q.wb) * yv(q.a0, q.b0) + q.wb * yv(q.a0, q.b0 + 1)) +
           q.wa * ((1 - q.wb) * yv(q.a0 + 1, q.b0) + q.wb * yv(q.a0 + 1, q.b0 + 1));
}

void ContinuumKernelSet::eval_K_row_on_segment(int i, int p, double x, double xi,
                                               std::span<double> out) const {
    const KTable& t = K[static_cast<std::size_t>(seg_index(i, p))];
    const auto q = locate(t.g, x, xi);
    const double* r00 = t.row(q.a0, q.b0);
    const double* r01 = t.row(q.a0, q.b0 + 1);
    const double* r10 = t.row(q.a0 + 1, q.b0);
    const double* r11 = t.row(q.a0 + 1, q.b0 + 1);
    const double w00 = (1 - q.wa) * (1 - q.wb), w01 = (1 - q.wa) * q.wb;
    const double w10 = q.wa * (1 - q.wb), w11 = q.wa * q.wb;
    for (int c = 0; c < t.nyn; ++c)
        out[static_cast<std::size_t>(c)] = w00 * r00[c] + w01 * r01[c] + w10 * r10[c] + w11 * r11[c];
}

double ContinuumKernelSet::eval_L_on_segment(int i, int j, int p, double x, double xi) const {
    const LTable& t = L[static_cast<std::size_t>(seg_index(i, p))][static_cast<std::size_t>(j)];
    const auto q = locate(t.g, x, xi);
    return (1 - q.wa) * ((1 - q.wb) * t.at(q.a0, q.b0) + q.wb * t.at(q.a0, q.b0 + 1)) +
           q.wa * ((1 - q.wb) * t.at(q.a0 + 1, q.b0) + q.wb * t.at(q.a0 + 1, q.b0 + 1));
}

double ContinuumKernelSet::eval_K(int i, double x, double xi, double y) const {
    return eval_K_on_segment(i, map.segment_of(i, x, xi), x, xi, y);
}

double ContinuumKernelSet::eval_L(int i, int j, double x, double xi) const {
    return eval_L_on_segment(i, j, map.segment_of(i, x, xi), x, xi);
}

void ContinuumKernelSet::eval_K_row(int i, double x, double xi, std::span<double> out) const {
    eval_K_row_on_segment(i, map.segment_of(i, x, xi), x, xi, out);
}

double ContinuumKernelSet::eval_G(int i, int j, double x) const {
    if (i <= j) return 0.0;
    return lerp_uniform(G[static_cast<std::size_t>(i) * m + j], 0.0, 1.0, x);
}

std::uint64_t ContinuumKernelSet::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : K) h = fnv1a(t.v, h);
    for (const auto& per_seg : L)
        for (const auto& t : per_seg) h = fnv1a(t.v, h);
    for (const auto& gi : G) h = fnv1a(gi, h);
    return h;
}

namespace {

void write_values_csv(const std::string& file, const KTable& t, const YGrid& yg) {
    std::ofstream os(file);
    os.precision(17);
    os << "x,xi,y,value\n";
    for (int a = 0; a < t.g.nx; ++a)
        for (int b = 0; b < t.g.nr; ++b) {
            const double* row = t.row(a, b);
            for (int c = 0; c < t.nyn; ++c)
                os << t.g.x_of(a) << "," << t.g.xi_of(a, b) << "," << yg.nodes()[static_cast<std::size_t>(c)]
                   << "," << row[c] << "\n";
        }
}

void write_values_csv(const std::string& file, const LTable& t) {
    std::ofstream os(file);
    os.precision(17);
    os << "x,xi,value\n";
    for (int a = 0; a < t.g.nx; ++a)
        for (int b = 0; b < t.g.nr; ++b)
            os << t.g.x_of(a) << "," << t.g.xi_of(a, b) << "," << t.at(a, b) << "\n";
}

std::vector<double> read_value_column(const std::string& file, int column) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot open " + file);
    std::string line;
    std::getline(is, line); // header
    std::vector<double> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        double val = 0;
        for (int c = 0; c <= column; ++c) {
            if (!std::getline(ss, cell, ',')) throw ConfigError("short row in " + file);
        }
        val = std::stod(cell);
        out.push_back(val);
    }
    return out;
}

std::string k_file(int i, int p) {
    return "K_i" + std::to_string(i + 1) + "_p" + std::to_string(p + 1) + ".csv";
}
std::string l_file(int i, int j, int p) {
    return "L_i" + std::to_string(i + 1) + "_j" + std::to_string(j + 1) + "_p" +
           std::to_string(p + 1) + ".csv";
}

} // namespace

void save_kernels(const ContinuumKernelSet& ks, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["type"] = "kernel-set";
    manifest["m"] = ks.m;
    manifest["grid"] = {{"nx", ks.K.empty() ? 0 : ks.K[0].g.nx},
                        {"nr", ks.K.empty() ? 0 : ks.K[0].g.nr},
                        {"ny_nodes", ks.ygrid.size()},
                        {"y_per_cell", ks.ygrid.per_cell()}};
    manifest["y_edges"] = ks.ygrid.edges();
    manifest["tol"] = ks.tol;
    manifest["iterations"] = ks.iterations;
    manifest["final_delta"] = ks.final_delta;
    std::ostringstream hh;
    hh << "fnv1a:" << std::hex << ks.content_hash();
    manifest["hash"] = hh.str();

    json segs = json::array();
    for (std::size_t s = 0; s < ks.segments.size(); ++s) {
        const auto [i, p] = ks.segments[s];
        json seg;
        seg["i"] = i + 1;
        seg["p"] = p + 1;
        seg["k_file"] = k_file(i, p);
        seg["upper_curve_at_x1"] = ks.K[s].g.up.back();
        seg["lower_curve_at_x1"] = ks.K[s].g.lo.back();
        json lf = json::array();
        for (int j = 0; j < ks.m; ++j) lf.push_back(l_file(i, j, p));
        seg["l_files"] = lf;
        segs.push_back(seg);
        write_values_csv(dir + "/" + k_file(i, p), ks.K[s], ks.ygrid);
        for (int j = 0; j < ks.m; ++j)
            write_values_csv(dir + "/" + l_file(i, j, p), ks.L[s][static_cast<std::size_t>(j)]);
    }
    manifest["segments"] = segs;

    {
        std::ofstream os(dir + "/G.csv");
        os.precision(17);
        os << "x";
        for (int i = 0; i < ks.m; ++i)
            for (int j = 0; j < ks.m; ++j)
                if (i > j) os << ",G_" << i + 1 << "_" << j + 1;
        os << "\n";
        for (std::size_t a = 0; a < ks.x_nodes.size(); ++a) {
            os << ks.x_nodes[a];
            for (int i = 0; i < ks.m; ++i)
                for (int j = 0; j < ks.m; ++j)
                    if (i > j) os << "," << ks.G[static_cast<std::size_t>(i) * ks.m + j][a];
            os << "\n";
        }
        manifest["g_file"] = "G.csv";
    }

    std::ofstream os(dir + "/manifest.json");
    os << manifest.dump(2) << "\n";
}

ContinuumKernelSet load_kernels(const std::string& dir, const ContinuumParams& p) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw ConfigError("cannot open " + dir + "/manifest.json");
    json manifest = json::parse(is);
    if (manifest.value("type", "") != "kernel-set")
        throw ConfigError(dir + ": not a kernel-set directory");

    ContinuumKernelSet ks;
    ks.m = manifest["m"].get<int>();
    const int nx = manifest["grid"]["nx"].get<int>();
    const int nr = manifest["grid"]["nr"].get<int>();
    ks.ygrid = YGrid(manifest["y_edges"].get<std::vector<double>>(),
                     manifest["grid"]["y_per_cell"].get<int>());
    ks.tol = manifest["tol"].get<double>();
    ks.iterations = manifest["iterations"].get<int>();
    ks.final_delta = manifest["final_delta"].get<double>();
    ks.map = build_segment_map(p, std::max(257, 2 * nx));
    ks.x_nodes = linspace(0.0, 1.0, nx);

    for (int i = 0; i < ks.m; ++i)
        for (int pp = i; pp < ks.m; ++pp) ks.segments.emplace_back(i, pp);

    for (const auto& [i, pp] : ks.segments) {
        SegmentGrid g;
        g.i = i;
        g.p = pp;
        g.nx = nx;
        g.nr = nr;
        g.lo.resize(static_cast<std::size_t>(nx));
        g.up.resize(static_cast<std::size_t>(nx));
        for (int a = 0; a < nx; ++a) {
            const double x = static_cast<double>(a) / (nx - 1);
            g.lo[static_cast<std::size_t>(a)] = ks.map.rho(i, pp + 1, x);
            g.up[static_cast<std::size_t>(a)] = ks.map.rho(i, pp, x);
        }
        KTable kt;
        kt.g = g;
        kt.nyn = ks.ygrid.size();
        kt.v = read_value_column(dir + "/" + k_file(i, pp), 3);
        if (kt.v.size() != static_cast<std::size_t>(nx) * nr * kt.nyn)
            throw ConfigError("bad table size in " + k_file(i, pp));
        ks.K.push_back(std::move(kt));
        std::vector<LTable> ltabs;
        for (int j = 0; j < ks.m; ++j) {
            LTable lt;
            lt.g = g;
            lt.v = read_value_column(dir + "/" + l_file(i, j, pp), 2);
            if (lt.v.size() != static_cast<std::size_t>(nx) * nr)
                throw ConfigError("bad table size in " + l_file(i, j, pp));
            ltabs.push_back(std::move(lt));
        }
        ks.L.push_back(std::move(ltabs));
    }

    ks.G.assign(static_cast<std::size_t>(ks.m) * static_cast<std::size_t>(ks.m),
                std::vector<double>(ks.x_nodes.size(), 0.0));
    // G columns are ordered (i>j) row-major in the csv
    {
        std::ifstream gis(dir + "/G.csv");
        if (!gis) throw ConfigError("cannot open " + dir + "/G.csv");
        std::string line;
        std::getline(gis, line);
        std::vector<std::pair<int, int>> order;
        for (int i = 0; i < ks.m; ++i)
            for (int j = 0; j < ks.m; ++j)
                if (i > j) order.emplace_back(i, j);
        std::vector<std::vector<double>> cols(order.size());
        while (std::getline(gis, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ','); // x
            for (auto& col : cols) {
                std::getline(ss, cell, ',');
                col.push_back(std::stod(cell));
            }
        }
        for (std::size_t k = 0; k < order.size(); ++k)
            ks.G[static_cast<std::size_t>(order[k].first) * ks.m + order[k].second] = cols[k];
    }
    return ks;
}

} // namespace hyperstab
