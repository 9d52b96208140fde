#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eventfeat/classifier.hpp"
#include "eventfeat/config.hpp"
#include "eventfeat/direct_learn.hpp"
#include "eventfeat/features.hpp"
#include "eventfeat/inverse_learn.hpp"
#include "eventfeat/whitening.hpp"

namespace eventfeat {

inline constexpr char kContainerMagic[8] = {'E', 'V', 'F', 'T', '0', '0', '0', '1'};

// Persisted model. Layout (little-endian): 8-byte magic, then sections of
// [4-byte tag][u64 payload length][payload]. Tags: CONF (config text),
// WHIT (whitening), BASI (u8 formulation + basis matrix), SVMM (optional
// classifier). Matrices are u64 rows, u64 cols, then row-major f64.
struct ModelContainer {
  PipelineConfig config;
  WhiteningModel whitening;
  Formulation kind = Formulation::kInverse;
  Dictionary dictionary;  // when kind == kInverse
  Transform transform;    // when kind == kDirect
  std::optional<LinearSvmModel> svm;

  Eigen::Index volume_dim() const;
  Eigen::Index num_basis() const;
  BasisView basis_view() const;
  NativeEncoder native_encoder() const;
};

std::vector<std::uint8_t> save_container(const ModelContainer& model);
ModelContainer load_container(std::span<const std::uint8_t> bytes);

void save_container_file(const std::string& path, const ModelContainer& model);
ModelContainer load_container_file(const std::string& path);

// Exact equality of every stored field (used for round-trip checks).
bool identical(const ModelContainer& a, const ModelContainer& b);

}  // namespace eventfeat
