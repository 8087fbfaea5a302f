#pragma once

#include <map>
#include <string>

#include "dirw/baseline.hpp"
#include "dirw/phantom.hpp"

namespace dirw {

// Parsed [section] key = value configuration file.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

ConfigMap parse_config_file(const std::string& path);
ConfigMap parse_config_text(const std::string& text);

struct RunConfig {
  // problem: either an image pair on disk or a generated phantom
  std::string source_path;
  std::string target_path;
  std::string phantom_kind;  // "isolated-blob" | "multi-organ" | ""
  std::uint64_t phantom_seed{7};

  // run
  std::string approach{"bspline-mo"};  // bspline-mo | mesh-mo | bspline-baseline
  int population{0};                   // 0 = approach default
  int generations{200};
  int repetitions{1};
  std::uint64_t base_seed{1000};
  long long sample_count{0};  // 0 = target voxel count
  std::size_t archive_capacity{1000};
  int clusters{10};

  // model
  std::array<int, 3> grid_points{7, 7, 7};
  int mesh_points{170};

  // baseline inner runs
  InnerRunConfig inner;

  std::string out_dir{"out"};

  void validate() const;
  int effective_population() const;

  static RunConfig from_config(const ConfigMap& map);
  // bundled desk-scale preset: 2D 64x64 phantom, 7x7 grid, 40 mesh points,
  // populations 50/100/24, 100 generations, 3 repetitions
  static RunConfig desk_preset(const std::string& approach,
                               const std::string& phantom_kind);
};

}  // namespace dirw
