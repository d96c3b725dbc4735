#pragma once

namespace docrl {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr const char* kArchiveFormat = "safetensors-compatible/1";
inline constexpr const char* kTokenizerFormat = "bpe-json/1";
inline constexpr const char* kReportSchema = "docrl-report/1";

}  // namespace docrl
