// File formats:
//  - CGOF1 field container: raw little-endian float32 pairs (re,im), column
//    order matching the in-memory row-major layout, plus a text sidecar
//    "<path>.hdr" describing dimension, points, box lengths, h, and scalar
//    type. Values are stored single-precision on purpose: the container is
//    an interchange format, not a checkpoint.
//  - JSON certificate snapshots (lattice minima with argmin and pass flag).
//  - CSV appender for sweep tables, printed with %.17g so reruns are
//    byte-identical.
#pragma once

#include <string>

#include "cgolab/grid.hpp"

namespace cgolab {

void write_cgof1(const std::string& path, const Field& f, double h,
                 const std::string& name = "");
Field read_cgof1(const std::string& path, double* h_out = nullptr);

struct Certificate {
    std::string name;
    double value = 0.0;           // the certified quantity (e.g. a lattice min)
    std::vector<double> arg;      // where the extremum was attained
    std::string lattice;          // human-readable lattice description
    bool pass = false;
};

void write_certificates(const std::string& path, const std::vector<Certificate>& certs);

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header);
    void row(const std::vector<std::string>& cells);
    static std::string num(double v);  // %.17g
  private:
    std::string path_;
};

} // namespace cgolab
