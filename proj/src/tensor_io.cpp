#include "mixlab/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace mixlab {

namespace {

constexpr const char* kHeader = "# mixlab-tensors v1";

std::array<char, 8> to_le_bytes(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> out{};
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  return out;
}

double from_le_bytes(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

Matrix as_column(const Vector& v) { return Matrix(v); }
Vector as_vector(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }
Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".manifest");
}

std::filesystem::path data_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".bin");
}

void save_tensors(const std::filesystem::path& stem, const std::vector<NamedTensor>& tensors) {
  const auto mpath = manifest_path(stem);
  const auto dpath = data_path(stem);
  std::ofstream manifest(mpath, std::ios::binary);
  if (!manifest) throw IoError("cannot write " + mpath.string());
  std::ofstream data(dpath, std::ios::binary);
  if (!data) throw IoError("cannot write " + dpath.string());

  manifest << kHeader << '\n';
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (t.name.empty() || t.name.find_first_of(" \t\r\n") != std::string::npos) {
      throw IoError("tensor name '" + t.name + "' is empty or contains whitespace (" + mpath.string() + ")");
    }
    manifest << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << ' ' << offset << '\n';
    std::string buffer(static_cast<std::size_t>(t.value.size()) * 8, '\0');
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      const auto bytes = to_le_bytes(t.value.data()[i]);
      std::copy(bytes.begin(), bytes.end(), buffer.begin() + i * 8);
    }
    data.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    offset += static_cast<std::uint64_t>(t.value.size()) * 8;
  }
  if (!manifest.good()) throw IoError("failed writing " + mpath.string());
  if (!data.good()) throw IoError("failed writing " + dpath.string());
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& stem) {
  const auto mpath = manifest_path(stem);
  const auto dpath = data_path(stem);
  std::ifstream manifest(mpath);
  if (!manifest) throw IoError("cannot read " + mpath.string());
  std::ifstream data(dpath, std::ios::binary);
  if (!data) throw IoError("cannot read " + dpath.string());
  const std::string blob((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());

  std::vector<NamedTensor> out;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name;
    long long rows = -1, cols = -1;
    unsigned long long offset = 0;
    if (!(fields >> name >> rows >> cols >> offset) || rows < 0 || cols < 0) {
      throw IoError(mpath.string() + ":" + std::to_string(line_no) + ": malformed manifest line");
    }
    const auto bytes = static_cast<unsigned long long>(rows) * static_cast<unsigned long long>(cols) * 8ULL;
    if (offset + bytes > blob.size()) {
      throw IoError(dpath.string() + ": tensor '" + name + "' extends past end of data");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = from_le_bytes(blob.data() + offset + static_cast<std::size_t>(i) * 8);
    }
    out.push_back({std::move(name), std::move(m)});
  }
  return out;
}

const Matrix& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw IoError("tensor '" + name + "' not found in container");
}

std::vector<NamedTensor> flatten_stack(const std::vector<DcHydraBlock>& blocks) {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const DcHydraBlock& b = blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    auto add_ffw = [&](const std::string& name, const FfwWeights& f) {
      out.push_back({p + name + ".w1", f.w1});
      out.push_back({p + name + ".b1", as_column(f.b1)});
      out.push_back({p + name + ".w2", f.w2});
      out.push_back({p + name + ".b2", as_column(f.b2)});
    };
    auto add_selective = [&](const std::string& name, const SelectiveWeights& s) {
      out.push_back({p + name + ".w_delta", as_column(s.w_delta)});
      out.push_back({p + name + ".bias", scalar(s.bias)});
      out.push_back({p + name + ".w_b", s.w_b});
      out.push_back({p + name + ".w_c", s.w_c});
      out.push_back({p + name + ".a_log", scalar(s.a_log)});
    };
    add_ffw("ffw_in", b.ffw_in);
    if (const auto* s = std::get_if<SsmMixerWeights>(&b.mixer.weights)) {
      add_selective("mixer.fwd", s->scan.fwd);
      add_selective("mixer.bwd", s->scan.bwd);
      out.push_back({p + "mixer.diag_gain", as_column(s->scan.diag_gain)});
      out.push_back({p + "mixer.w_out", s->w_out});
    } else {
      const auto& a = std::get<AttentionMixerWeights>(b.mixer.weights);
      out.push_back({p + "mixer.wq", a.attn.wq});
      out.push_back({p + "mixer.wk", a.attn.wk});
      out.push_back({p + "mixer.wv", a.attn.wv});
      out.push_back({p + "mixer.wo", a.attn.wo});
      for (std::size_t h = 0; h < a.attn.head_features.size(); ++h) {
        out.push_back({p + "mixer.omega" + std::to_string(h), a.attn.head_features[h].omega});
      }
      out.push_back({p + "mixer.rope_base", scalar(a.attn.rope ? a.attn.rope->base() : 0.0)});
    }
    out.push_back({p + "conv.kernel", b.conv.kernel});
    out.push_back({p + "conv.bias", as_column(b.conv.bias)});
    out.push_back({p + "conv.dilation", scalar(static_cast<double>(b.conv.dilation))});
    add_ffw("ffw_out", b.ffw_out);
    out.push_back({p + "norm.scale", as_column(b.norm_scale)});
    out.push_back({p + "norm.shift", as_column(b.norm_shift)});
  }
  return out;
}

std::vector<DcHydraBlock> unflatten_stack(const std::vector<NamedTensor>& tensors,
                                          const BlockStackConfig& cfg) {
  cfg.validate();
  std::vector<DcHydraBlock> blocks;
  for (Eigen::Index i = 0; i < cfg.num_blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    auto get = [&](const std::string& name) -> const Matrix& { return find_tensor(tensors, p + name); };
    auto get_ffw = [&](const std::string& name) {
      return FfwWeights{get(name + ".w1"), as_vector(get(name + ".b1")), get(name + ".w2"),
                        as_vector(get(name + ".b2"))};
    };
    auto get_selective = [&](const std::string& name) {
      SelectiveWeights s;
      s.w_delta = as_vector(get(name + ".w_delta"));
      s.bias = get(name + ".bias")(0, 0);
      s.w_b = get(name + ".w_b");
      s.w_c = get(name + ".w_c");
      s.a_log = get(name + ".a_log")(0, 0);
      return s;
    };

    DcHydraBlock b;
    b.ffw_in = get_ffw("ffw_in");
    b.mixer.kind = cfg.mixer;
    if (cfg.mixer == MixerKind::hydra || cfg.mixer == MixerKind::bimamba) {
      SsmMixerWeights s;
      s.scan.fwd = get_selective("mixer.fwd");
      s.scan.bwd = get_selective("mixer.bwd");
      s.scan.diag_gain = as_vector(get("mixer.diag_gain"));
      s.w_out = get("mixer.w_out");
      b.mixer.weights = std::move(s);
    } else {
      AttentionMixerWeights a;
      a.num_heads = cfg.num_heads;
      a.attn.wq = get("mixer.wq");
      a.attn.wk = get("mixer.wk");
      a.attn.wv = get("mixer.wv");
      a.attn.wo = get("mixer.wo");
      if (cfg.mixer == MixerKind::favor) {
        for (Eigen::Index h = 0; h < cfg.num_heads; ++h) {
          a.attn.head_features.push_back({get("mixer.omega" + std::to_string(h)), 0});
        }
      }
      const double base = get("mixer.rope_base")(0, 0);
      if (base > 0.0) a.attn.rope.emplace(cfg.d_model / cfg.num_heads, base);
      b.mixer.weights = std::move(a);
    }
    b.conv.kernel = get("conv.kernel");
    b.conv.bias = as_vector(get("conv.bias"));
    b.conv.dilation = static_cast<Eigen::Index>(get("conv.dilation")(0, 0));
    b.ffw_out = get_ffw("ffw_out");
    b.norm_scale = as_vector(get("norm.scale"));
    b.norm_shift = as_vector(get("norm.shift"));
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace mixlab
