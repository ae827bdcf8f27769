#include "cgolab/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cgolab {

namespace {

// The container is explicitly little-endian. On a big-endian host we would
// need byte swaps; refuse loudly instead of writing garbage.
void require_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    if (b != 1) fail("CGOF1 requires a little-endian host");
}

} // namespace

void write_cgof1(const std::string& path, const Field& f, double h,
                 const std::string& name) {
    require_little_endian();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open " + path + " for writing");
    std::vector<float> buf(2 * f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        buf[2 * i] = static_cast<float>(f.data[i].real());
        buf[2 * i + 1] = static_cast<float>(f.data[i].imag());
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) fail("short write to " + path);

    std::ofstream hdr(path + ".hdr");
    if (!hdr) fail("cannot open " + path + ".hdr for writing");
    hdr << "format = CGOF1\n";
    hdr << "scalar = complex64-le\n";
    hdr << "dim = " << f.grid.dim << "\n";
    hdr << "npts =";
    for (int a = 0; a < f.grid.dim; ++a) hdr << " " << f.grid.npts[a];
    hdr << "\nlen =";
    char tmp[64];
    for (int a = 0; a < f.grid.dim; ++a) {
        std::snprintf(tmp, sizeof tmp, " %.17g", f.grid.len[a]);
        hdr << tmp;
    }
    std::snprintf(tmp, sizeof tmp, "%.17g", h);
    hdr << "\nh = " << tmp << "\n";
    hdr << "count = " << f.size() << "\n";
    if (!name.empty()) hdr << "name = " << name << "\n";
}

Field read_cgof1(const std::string& path, double* h_out) {
    require_little_endian();
    std::ifstream hdr(path + ".hdr");
    if (!hdr) fail("cannot open " + path + ".hdr");
    GridSpec g;
    g.dim = 0;
    double h = 0.0;
    std::size_t count = 0;
    std::string line;
    int lineno = 0;
    while (std::getline(hdr, line)) {
        ++lineno;
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(val);
        std::istringstream iv(val);
        if (key == "format") {
            if (val != "CGOF1")
                fail(path + ".hdr:" + std::to_string(lineno) + ": unsupported format " + val);
        } else if (key == "scalar") {
            if (val != "complex64-le")
                fail(path + ".hdr:" + std::to_string(lineno) + ": unsupported scalar " + val);
        } else if (key == "dim") {
            iv >> g.dim;
        } else if (key == "npts") {
            for (int a = 0; a < kMaxDim && iv >> g.npts[a]; ++a) {}
        } else if (key == "len") {
            for (int a = 0; a < kMaxDim && iv >> g.len[a]; ++a) {}
        } else if (key == "h") {
            iv >> h;
        } else if (key == "count") {
            iv >> count;
        }
    }
    if (g.dim == 0) fail(path + ".hdr: missing dim");
    g.validate();
    if (count != g.volume()) fail(path + ".hdr: count does not match npts");

    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    std::vector<float> buf(2 * count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(float))
        fail(path + ": truncated data (expected " + std::to_string(count) + " samples)");

    Field f(g);
    for (std::size_t i = 0; i < count; ++i)
        f.data[i] = cplx{static_cast<double>(buf[2 * i]), static_cast<double>(buf[2 * i + 1])};
    if (h_out != nullptr) *h_out = h;
    return f;
}

void write_certificates(const std::string& path, const std::vector<Certificate>& certs) {
    nlohmann::ordered_json root = nlohmann::ordered_json::array();
    for (const auto& c : certs) {
        nlohmann::ordered_json j;
        j["name"] = c.name;
        j["value"] = c.value;
        j["arg"] = c.arg;
        j["lattice"] = c.lattice;
        j["pass"] = c.pass;
        root.push_back(j);
    }
    std::ofstream out(path);
    if (!out) fail("cannot open " + path + " for writing");
    out << root.dump(2) << "\n";
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header) : path_(path) {
    std::ofstream out(path_);
    if (!out) fail("cannot open " + path_ + " for writing");
    out << header << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    std::ofstream out(path_, std::ios::app);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ",";
        out << cells[i];
    }
    out << "\n";
}

std::string CsvWriter::num(double v) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.17g", v);
    return tmp;
}

} // namespace cgolab
