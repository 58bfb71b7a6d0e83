#include "ovabench/matrix.hpp"

#include <algorithm>

namespace ovabench {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> indices)
{
    Matrix out(indices.size(), src.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= src.rows()) {
            throw ShapeError("row index " + std::to_string(indices[i]) + " out of range");
        }
        std::ranges::copy(src.row(indices[i]), out.row(i).begin());
    }
    return out;
}

}  // namespace ovabench
