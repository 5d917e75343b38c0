#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "boltzk/kernel.hpp"
#include "boltzk/velocity_grid.hpp"
#include "boltzk/weights.hpp"

namespace boltzk {

/// Which bilinear object a matrix represents. The *_FORM kinds are the
/// symmetric quadratic forms assembled directly from the weak form (PSD by
/// construction); the plain L kinds are collocation operator matrices
/// (column j = operator applied to the j-th nodal impulse), symmetrized
/// after assembly with the deviation recorded.
enum class OperatorKind : std::uint32_t {
  L = 0,
  L1,
  L2,
  L_FORM,
  L1_FORM,
  L2_FORM,
  D_GRAM,
  D_GRAM_WEIGHTED,
  BALL_MASS,
  L_EVOLVE,
};

inline const char* kind_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::L: return "L";
    case OperatorKind::L1: return "L1";
    case OperatorKind::L2: return "L2";
    case OperatorKind::L_FORM: return "L_FORM";
    case OperatorKind::L1_FORM: return "L1_FORM";
    case OperatorKind::L2_FORM: return "L2_FORM";
    case OperatorKind::D_GRAM: return "D_GRAM";
    case OperatorKind::D_GRAM_WEIGHTED: return "D_GRAM_WEIGHTED";
    case OperatorKind::BALL_MASS: return "BALL_MASS";
    case OperatorKind::L_EVOLVE: return "L_EVOLVE";
  }
  return "?";
}

inline std::optional<OperatorKind> kind_from_name(std::string s) {
  for (auto& c : s) c = char(std::toupper(unsigned(c)));
  for (auto k : {OperatorKind::L, OperatorKind::L1, OperatorKind::L2,
                 OperatorKind::L_FORM, OperatorKind::L1_FORM, OperatorKind::L2_FORM,
                 OperatorKind::D_GRAM, OperatorKind::D_GRAM_WEIGHTED,
                 OperatorKind::BALL_MASS, OperatorKind::L_EVOLVE}) {
    if (s == kind_name(k)) return k;
  }
  return std::nullopt;
}

/// Everything that determines a matrix's content, in a canonical text form;
/// the cache key is the hash of that text.
struct OperatorProvenance {
  std::string   text;
  std::uint64_t grid_hash = 0;
  std::uint64_t key       = 0;
  std::uint32_t nsigma    = 0;
};

/// Bump whenever the assembly discretization changes in a way that alters the
/// matrices; retires every cached entry written by older code.
inline constexpr int kAssemblyScheme = 2;

inline OperatorProvenance make_provenance(OperatorKind kind, const GridSpec& gs,
                                          const KernelSpec* ks, int sphere_order,
                                          const WeightSpec*   ws          = nullptr,
                                          std::optional<Real> ball_radius = {},
                                          const std::string&  extra       = {}) {
  std::ostringstream os;
  os << "kind=" << kind_name(kind) << "\nscheme=" << kAssemblyScheme << "\n"
     << gs.canonical() << "\n";
  if (ks) os << ks->canonical() << "\n";
  if (sphere_order > 0) os << "sphere_order=" << sphere_order << "\n";
  if (ws) os << ws->canonical() << "\n";
  if (ball_radius) {
    std::ostringstream r;
    r.precision(17);
    r << *ball_radius;
    os << "ball_radius=" << r.str() << "\n";
  }
  if (!extra.empty()) os << extra << "\n";
  OperatorProvenance p;
  p.text      = os.str();
  p.grid_hash = fnv1a64(gs.canonical());
  p.key       = fnv1a64(p.text);
  p.nsigma    = std::uint32_t(2 * sphere_order * sphere_order);
  return p;
}

/// Real square matrix (dense or diagonal storage) with provenance metadata
/// and a binary file round trip. All kinds act on complex fields entrywise
/// through their real action.
class OperatorMatrix {
 public:
  OperatorKind       kind = OperatorKind::L;
  OperatorProvenance prov;
  Real               symmetry_defect = 0;  // ||A - A^T|| / ||A||, before symmetrization
  Eigen::MatrixXd    dense;                // empty when diagonal
  Eigen::VectorXd    diag;                 // empty when dense

  bool is_diagonal() const { return dense.size() == 0; }
  int  size() const { return is_diagonal() ? int(diag.size()) : int(dense.rows()); }

  Field apply(const Field& f) const {
    if (is_diagonal()) return diag.cwiseProduct(f);
    return dense * f;
  }
  ComplexField apply(const ComplexField& f) const {
    if (is_diagonal()) return diag.cast<Complex>().cwiseProduct(f);
    ComplexField out(f.size());
    out.real() = dense * f.real().matrix().eval();
    out.imag() = dense * f.imag().matrix().eval();
    return out;
  }

  /// f^T A f (real) resp. Re f^H A f (complex; real automatically when A is
  /// symmetric, which every kind here is after assembly).
  Real quad_form(const Field& f) const {
    if (is_diagonal()) return diag.cwiseProduct(f).dot(f);
    return f.dot(dense * f);
  }
  Real quad_form(const ComplexField& f) const {
    if (is_diagonal()) return diag.cwiseProduct(f.cwiseAbs2().matrix()).sum();
    const Field re = f.real(), im = f.imag();
    return re.dot(dense * re) + im.dot(dense * im);
  }

  std::size_t bytes() const {
    return (is_diagonal() ? std::size_t(diag.size())
                          : std::size_t(dense.rows()) * std::size_t(dense.cols())) *
           sizeof(double);
  }

  void save(const std::filesystem::path& path) const;
  static OperatorMatrix load(const std::filesystem::path& path);
};

namespace detail {

constexpr char kMatrixMagic[8] = {'B', 'K', 'M', 'A', 'T', 'R', 'X', '1'};

struct MatrixHeader {
  char          magic[8];
  std::uint32_t kind    = 0;
  std::uint32_t storage = 0;  // 0 dense, 1 diagonal
  std::uint64_t rows = 0, cols = 0;
  double        symmetry_defect = 0;
  std::uint64_t grid_hash = 0, key = 0;
  std::uint32_t nsigma   = 0;
  std::uint32_t reserved = 0;
  std::uint64_t payload_hash = 0;
  std::uint64_t meta_len     = 0;
};
static_assert(sizeof(MatrixHeader) == 80);

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void OperatorMatrix::save(const std::filesystem::path& path) const {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());

  detail::MatrixHeader h;
  std::memcpy(h.magic, detail::kMatrixMagic, 8);
  h.kind            = std::uint32_t(kind);
  h.storage         = is_diagonal() ? 1 : 0;
  h.rows            = std::uint64_t(size());
  h.cols            = is_diagonal() ? 1 : std::uint64_t(dense.cols());
  h.symmetry_defect = symmetry_defect;
  h.grid_hash       = prov.grid_hash;
  h.key             = prov.key;
  h.nsigma          = prov.nsigma;
  h.meta_len        = prov.text.size();

  // Row-major payload (Eigen dense storage is column-major).
  std::vector<double> payload;
  if (is_diagonal()) {
    payload.assign(diag.data(), diag.data() + diag.size());
  } else {
    payload.resize(std::size_t(dense.rows()) * dense.cols());
    for (int i = 0; i < dense.rows(); ++i)
      for (int j = 0; j < dense.cols(); ++j)
        payload[std::size_t(i) * dense.cols() + j] = dense(i, j);
  }
  h.payload_hash = fnv1a64(payload.data(), payload.size() * sizeof(double));

  // Write to a temp file and rename so concurrent readers never see a torn file.
  const fs::path tmp = path.string() + ".tmp" + hex64(fnv1a64(path.string()));
  {
    detail::FilePtr fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw ConfigError("cannot open for writing: " + tmp.string());
    auto put = [&](const void* p, std::size_t n) {
      if (std::fwrite(p, 1, n, fp.get()) != n)
        throw ConfigError("short write: " + tmp.string());
    };
    put(&h, sizeof(h));
    put(prov.text.data(), prov.text.size());
    put(payload.data(), payload.size() * sizeof(double));
  }
  fs::rename(tmp, path);
}

inline OperatorMatrix OperatorMatrix::load(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ConfigError("cannot open matrix file: " + path.string());
  auto get = [&](void* p, std::size_t n) {
    if (std::fread(p, 1, n, fp.get()) != n)
      throw ConfigError("truncated matrix file: " + path.string());
  };
  detail::MatrixHeader h;
  get(&h, sizeof(h));
  if (std::memcmp(h.magic, detail::kMatrixMagic, 8) != 0)
    throw ConfigError("not a matrix file (bad magic): " + path.string());

  OperatorMatrix m;
  m.kind            = OperatorKind(h.kind);
  m.symmetry_defect = h.symmetry_defect;
  m.prov.grid_hash  = h.grid_hash;
  m.prov.key        = h.key;
  m.prov.nsigma     = h.nsigma;
  m.prov.text.resize(h.meta_len);
  if (h.meta_len) get(m.prov.text.data(), h.meta_len);

  const std::size_t count =
      h.storage == 1 ? std::size_t(h.rows) : std::size_t(h.rows) * h.cols;
  std::vector<double> payload(count);
  get(payload.data(), count * sizeof(double));
  if (fnv1a64(payload.data(), count * sizeof(double)) != h.payload_hash)
    throw ConfigError("matrix file checksum mismatch: " + path.string());

  if (h.storage == 1) {
    m.diag = Eigen::Map<const Eigen::VectorXd>(payload.data(), long(h.rows));
  } else {
    m.dense.resize(long(h.rows), long(h.cols));
    for (std::uint64_t i = 0; i < h.rows; ++i)
      for (std::uint64_t j = 0; j < h.cols; ++j)
        m.dense(long(i), long(j)) = payload[i * h.cols + j];
  }
  return m;
}

/// Cache location for a provenance key, or nullopt when no cache directory is
/// configured (BOLTZK_CACHE env var or explicit directory).
inline std::optional<std::filesystem::path> cache_path(const OperatorProvenance& p,
                                                       std::string dir = {}) {
  if (dir.empty()) {
    const char* env = std::getenv("BOLTZK_CACHE");
    if (env) dir = env;
  }
  if (dir.empty()) return std::nullopt;
  return std::filesystem::path(dir) / ("op_" + hex64(p.key) + ".bkm");
}

}  // namespace boltzk
