#pragma once

#include <array>
#include <string>
#include <string_view>

namespace ovabench {

/// The four ways of turning embeddings into class probabilities.
enum class HeadKind {
    SoftmaxAffine,  // "softmax"
    SoftmaxDM,      // "dm"
    OvaAffine,      // "ova"
    OvaDM,          // "ova_dm"
};

inline constexpr std::array<HeadKind, 4> all_heads = {HeadKind::SoftmaxAffine, HeadKind::SoftmaxDM,
                                                      HeadKind::OvaAffine, HeadKind::OvaDM};

[[nodiscard]] constexpr bool is_distance_head(HeadKind head) noexcept
{
    return head == HeadKind::SoftmaxDM || head == HeadKind::OvaDM;
}

[[nodiscard]] constexpr bool is_ova_head(HeadKind head) noexcept
{
    return head == HeadKind::OvaAffine || head == HeadKind::OvaDM;
}

[[nodiscard]] std::string_view to_string(HeadKind head) noexcept;

/// Parses "softmax", "dm", "ova" or "ova_dm"; throws std::invalid_argument otherwise.
[[nodiscard]] HeadKind parse_head_kind(std::string_view name);

}  // namespace ovabench
