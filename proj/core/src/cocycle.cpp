#include "rdslab/cocycle.hpp"

namespace rdslab {

ScaledMat CocycleTrace::subproduct(std::size_t i, std::size_t k) const {
    ScaledMat p;
    for (std::size_t j = 0; j < k; ++j) p.absorb(factors[i + j]);
    return p;
}

std::vector<double> CocycleTrace::lognorm_increments() const {
    std::vector<double> xs(length());
    for (std::size_t i = 1; i <= length(); ++i)
        xs[i - 1] = lognorms[i] - lognorms[i - 1];
    return xs;
}

CocycleTrace compose_word(const MapTuple& tuple,
                          const std::function<unsigned(std::uint64_t)>& word,
                          std::size_t n, const TorusPoint& p) {
    CocycleTrace tr;
    tr.points.reserve(n + 1);
    tr.symbols.reserve(n);
    tr.factors.reserve(n);
    tr.products.reserve(n + 1);
    tr.lognorms.reserve(n + 1);

    tr.points.push_back(p);
    tr.products.push_back(ScaledMat{});
    tr.lognorms.push_back(0.0);

    TorusPoint cur = p;
    ScaledMat prod;
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned s = word(i);
        if (s >= tuple.size())
            throw SymbolRangeError("compose_word: symbol out of range");
        auto [img, df] = tuple[s].evaluate(cur);
        cur = img;
        prod.absorb(df);
        tr.symbols.push_back(s);
        tr.factors.push_back(df);
        tr.points.push_back(cur);
        tr.products.push_back(prod);
        tr.lognorms.push_back(prod.lognorm());
    }
    return tr;
}

SplitEstimate singular_split(const ScaledMat& product) {
    if (!product.mat.finite())
        throw std::domain_error("singular_split: non-finite product");
    SplitEstimate est;
    est.log_sigma1 = product.lognorm();
    // ||A^n|| = 1 within 1e-12: no distinguished contracted direction.
    if (std::fabs(est.log_sigma1) <= 1e-12) {
        est.degenerate = true;
        est.theta_s = Direction{M_PI / 2};
        est.theta_u = Direction{0.0};
        return est;
    }
    const SingularDirections sd = singular_directions(product.mat);
    est.theta_s = Direction{sd.theta_min};
    est.theta_u = Direction{sd.theta_max};
    est.degenerate = false;
    return est;
}

}  // namespace rdslab
