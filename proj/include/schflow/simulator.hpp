#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "schflow/errors.hpp"
#include "schflow/numeric.hpp"
#include "schflow/protocol.hpp"
#include "schflow/spectrum.hpp"

namespace schflow {

using cplx = std::complex<double>;

inline constexpr std::int64_t state_dim_cap = std::int64_t{1} << 24;
inline constexpr std::int64_t canonical_atom_cap = std::int64_t{1} << 12;

struct Register {
    std::string name;
    std::int64_t dim;
    Party owner;
    bool operator==(const Register&) const = default;
};

// Dense two-party state. Amplitudes are indexed row-major over the register
// list, last register fastest. comm_cost tracks qubits moved across the cut
// since the state was created (provenance, not part of the physics).
struct BipartiteState {
    std::vector<Register> registers;
    std::vector<cplx> amplitudes;
    double comm_cost = 0.0;
    bool subnormalized = false; // only decomposition routines may set this

    std::int64_t dim() const {
        std::int64_t d = 1;
        for (const auto& r : registers) d *= r.dim;
        return d;
    }

    std::size_t reg_index(const std::string& name) const {
        for (std::size_t k = 0; k < registers.size(); ++k)
            if (registers[k].name == name) return k;
        fail(Errc::shape_mismatch, "no register named " + name);
    }

    std::vector<std::int64_t> strides() const {
        std::vector<std::int64_t> s(registers.size(), 1);
        for (std::size_t k = registers.size(); k-- > 1;) s[k - 1] = s[k] * registers[k].dim;
        return s;
    }

    double norm() const {
        double n2 = 0.0;
        for (const cplx& a : amplitudes) n2 += std::norm(a);
        return std::sqrt(n2);
    }
};

inline void validate_state(const BipartiteState& st) {
    std::set<std::string> names;
    std::int64_t d = 1;
    for (const auto& r : st.registers) {
        if (r.dim < 1) fail(Errc::shape_mismatch, "register with dimension < 1");
        if (!names.insert(r.name).second) fail(Errc::shape_mismatch, "duplicate register " + r.name);
        d *= r.dim;
        if (d > state_dim_cap) fail(Errc::too_large, "state exceeds the dimension cap");
    }
    if (static_cast<std::int64_t>(st.amplitudes.size()) != d)
        fail(Errc::shape_mismatch, "amplitude count does not match register dimensions");
    if (!st.subnormalized && std::abs(st.norm() - 1.0) > tol::norm)
        fail(Errc::not_normalized, "state norm drifted from 1");
}

namespace detail {

// Odometer over `dims`, last entry fastest, reporting the running offset
// sum(digit_k * strides[k]). Handles the empty case as a single visit.
template <class F>
void for_each_offset(const std::vector<std::int64_t>& dims,
                     const std::vector<std::int64_t>& strides, F&& fn) {
    std::size_t n = dims.size();
    std::vector<std::int64_t> digit(n, 0);
    std::int64_t off = 0;
    for (;;) {
        fn(off);
        std::size_t k = n;
        for (;;) {
            if (k == 0) return;
            --k;
            ++digit[k];
            off += strides[k];
            if (digit[k] < dims[k]) break;
            digit[k] = 0;
            off -= dims[k] * strides[k];
        }
    }
}

// Same walk tracking two offset systems at once (used to permute layouts).
template <class F>
void for_each_offset2(const std::vector<std::int64_t>& dims,
                      const std::vector<std::int64_t>& s1,
                      const std::vector<std::int64_t>& s2, F&& fn) {
    std::size_t n = dims.size();
    std::vector<std::int64_t> digit(n, 0);
    std::int64_t o1 = 0, o2 = 0;
    for (;;) {
        fn(o1, o2);
        std::size_t k = n;
        for (;;) {
            if (k == 0) return;
            --k;
            ++digit[k];
            o1 += s1[k];
            o2 += s2[k];
            if (digit[k] < dims[k]) break;
            digit[k] = 0;
            o1 -= dims[k] * s1[k];
            o2 -= dims[k] * s2[k];
        }
    }
}

inline std::vector<std::int64_t> gather(const std::vector<std::int64_t>& all,
                                        const std::vector<std::size_t>& idx) {
    std::vector<std::int64_t> out;
    out.reserve(idx.size());
    for (std::size_t k : idx) out.push_back(all[k]);
    return out;
}

} // namespace detail

inline BipartiteState make_canonical_state(const SchmidtSpectrum& spec) {
    std::int64_t n = static_cast<std::int64_t>(spec.size());
    if (n > canonical_atom_cap) fail(Errc::too_large, "canonical state limited to 4096 atoms");
    BipartiteState st;
    st.registers = {{"A", n, Party::A}, {"B", n, Party::B}};
    st.amplitudes.assign(static_cast<std::size_t>(n * n), cplx{0.0, 0.0});
    for (std::int64_t i = 0; i < n; ++i)
        st.amplitudes[static_cast<std::size_t>(i * n + i)] = std::sqrt(spec.coefficients[i]);
    return st;
}

// Canonical state over a factored register layout: A-side registers A0,A1,...
// with dims a_dims, B-side B0,B1,... with dims b_dims, and the spectrum laid
// out along the joint diagonal. Needed wherever moving a single register must
// cost exactly its own qubit count.
inline BipartiteState make_canonical_state_shaped(const SchmidtSpectrum& spec,
                                                  const std::vector<std::int64_t>& a_dims,
                                                  const std::vector<std::int64_t>& b_dims) {
    std::int64_t pa = 1, pb = 1;
    for (std::int64_t d : a_dims) pa *= d;
    for (std::int64_t d : b_dims) pb *= d;
    if (static_cast<std::int64_t>(spec.size()) > std::min(pa, pb))
        fail(Errc::out_of_domain, "spectrum does not fit the requested shape");
    if (pa * pb > state_dim_cap) fail(Errc::too_large, "state exceeds the dimension cap");

    BipartiteState st;
    for (std::size_t k = 0; k < a_dims.size(); ++k)
        st.registers.push_back({"A" + std::to_string(k), a_dims[k], Party::A});
    for (std::size_t k = 0; k < b_dims.size(); ++k)
        st.registers.push_back({"B" + std::to_string(k), b_dims[k], Party::B});
    st.amplitudes.assign(static_cast<std::size_t>(pa * pb), cplx{0.0, 0.0});
    for (std::size_t i = 0; i < spec.size(); ++i) {
        std::int64_t f = static_cast<std::int64_t>(i) * pb + static_cast<std::int64_t>(i);
        st.amplitudes[static_cast<std::size_t>(f)] = std::sqrt(spec.coefficients[i]);
    }
    return st;
}

struct SchmidtResult {
    std::vector<double> spectrum; // squared singular values, descending
    std::size_t rank;             // singular values above rank_tol
};

inline SchmidtResult schmidt_coefficients(const BipartiteState& st, double rank_tol = tol::rank) {
    std::vector<std::size_t> ai, bi;
    for (std::size_t k = 0; k < st.registers.size(); ++k)
        (st.registers[k].owner == Party::A ? ai : bi).push_back(k);
    std::vector<std::int64_t> strides = st.strides();

    std::int64_t ra = 1, cb = 1;
    for (std::size_t k : ai) ra *= st.registers[k].dim;
    for (std::size_t k : bi) cb *= st.registers[k].dim;
    if (std::min(ra, cb) > 2048 || st.dim() > (std::int64_t{1} << 22))
        fail(Errc::too_large, "schmidt decomposition too large");

    std::vector<std::int64_t> offa, offb;
    offa.reserve(static_cast<std::size_t>(ra));
    offb.reserve(static_cast<std::size_t>(cb));
    std::vector<std::int64_t> adims, bdims;
    for (std::size_t k : ai) adims.push_back(st.registers[k].dim);
    for (std::size_t k : bi) bdims.push_back(st.registers[k].dim);
    detail::for_each_offset(adims, detail::gather(strides, ai),
                            [&](std::int64_t o) { offa.push_back(o); });
    detail::for_each_offset(bdims, detail::gather(strides, bi),
                            [&](std::int64_t o) { offb.push_back(o); });

    Eigen::MatrixXcd m(ra, cb);
    for (std::int64_t p = 0; p < ra; ++p)
        for (std::int64_t q = 0; q < cb; ++q)
            m(p, q) = st.amplitudes[static_cast<std::size_t>(offa[static_cast<std::size_t>(p)] +
                                                             offb[static_cast<std::size_t>(q)])];

    // Coefficients via the smaller Gram matrix. Eigen's BDCSVD miscomputes
    // clustered singular values of complex matrices (observed on 3.4.0), and
    // the symmetric eigensolver already yields the squared values we need.
    Eigen::MatrixXcd gram;
    if (ra <= cb)
        gram.noalias() = m * m.adjoint();
    else
        gram.noalias() = m.adjoint() * m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
    double lmax = std::max(0.0, es.eigenvalues().maxCoeff());
    double dust = static_cast<double>(std::max(ra, cb)) *
                  std::numeric_limits<double>::epsilon() * lmax;
    SchmidtResult out{{}, 0};
    for (Eigen::Index k = es.eigenvalues().size(); k-- > 0;) {
        double lambda = es.eigenvalues()(k);
        if (lambda <= dust) continue;
        if (lambda > std::max(rank_tol * rank_tol, dust)) ++out.rank;
        out.spectrum.push_back(lambda);
    }
    if (out.spectrum.empty()) out.spectrum.push_back(0.0);
    return out;
}

// Inner product after aligning registers by (name, dim). Owners are ignored:
// moving a register never changes the amplitude vector, only the cut.
inline cplx inner_product(const BipartiteState& a, const BipartiteState& b) {
    if (a.registers.size() != b.registers.size())
        fail(Errc::shape_mismatch, "states have different register counts");
    std::vector<std::int64_t> bstride_for_a(a.registers.size());
    std::vector<std::int64_t> bstrides = b.strides();
    bool same_order = true;
    for (std::size_t k = 0; k < a.registers.size(); ++k) {
        std::size_t kb = b.reg_index(a.registers[k].name);
        if (a.registers[k].dim != b.registers[kb].dim)
            fail(Errc::shape_mismatch, "register " + a.registers[k].name + " differs in dimension");
        bstride_for_a[k] = bstrides[kb];
        if (kb != k) same_order = false;
    }
    cplx acc{0.0, 0.0};
    if (same_order) {
        for (std::size_t f = 0; f < a.amplitudes.size(); ++f)
            acc += std::conj(a.amplitudes[f]) * b.amplitudes[f];
        return acc;
    }
    std::vector<std::int64_t> adims;
    for (const auto& r : a.registers) adims.push_back(r.dim);
    detail::for_each_offset2(adims, a.strides(), bstride_for_a, [&](std::int64_t oa, std::int64_t ob) {
        acc += std::conj(a.amplitudes[static_cast<std::size_t>(oa)]) *
               b.amplitudes[static_cast<std::size_t>(ob)];
    });
    return acc;
}

inline double fidelity(const BipartiteState& a, const BipartiteState& b) {
    return std::abs(inner_product(a, b));
}

// --- step execution ---

namespace detail {

inline void append_registers(BipartiteState& st, Party owner,
                             const std::vector<std::string>& names, int qubits) {
    std::int64_t dim_each = std::int64_t{1} << qubits;
    std::int64_t factor = 1;
    for (const auto& n : names) {
        for (const auto& r : st.registers)
            if (r.name == n) fail(Errc::shape_mismatch, "register " + n + " already exists");
        factor *= dim_each;
    }
    if (st.dim() * factor > state_dim_cap) fail(Errc::too_large, "append exceeds the dimension cap");

    std::vector<cplx> amp(st.amplitudes.size() * static_cast<std::size_t>(factor), cplx{0.0, 0.0});
    for (std::size_t f = 0; f < st.amplitudes.size(); ++f)
        amp[f * static_cast<std::size_t>(factor)] = st.amplitudes[f];
    st.amplitudes = std::move(amp);
    for (const auto& n : names) st.registers.push_back({n, dim_each, owner});
}

inline void discard_registers(BipartiteState& st, Party owner,
                              const std::vector<std::string>& names, int qubits) {
    std::int64_t dim_each = std::int64_t{1} << qubits;
    std::vector<std::size_t> drop;
    for (const auto& n : names) {
        std::size_t k = st.reg_index(n);
        if (st.registers[k].owner != owner) fail(Errc::shape_mismatch, "discard of foreign register");
        if (st.registers[k].dim != dim_each) fail(Errc::shape_mismatch, "discard dimension mismatch");
        drop.push_back(k);
    }
    std::vector<std::int64_t> strides = st.strides();

    double dev2 = 0.0;
    std::vector<cplx> kept;
    kept.reserve(st.amplitudes.size() / static_cast<std::size_t>(dim_each));
    for (std::size_t f = 0; f < st.amplitudes.size(); ++f) {
        bool zero = true;
        for (std::size_t k : drop)
            if ((static_cast<std::int64_t>(f) / strides[k]) % st.registers[k].dim != 0) {
                zero = false;
                break;
            }
        if (zero)
            kept.push_back(st.amplitudes[f]);
        else
            dev2 += std::norm(st.amplitudes[f]);
    }
    if (std::sqrt(dev2) > tol::discard)
        fail(Errc::discard_nonzero, "discarded registers deviate from |0...0> by " +
                                        format_double17(std::sqrt(dev2)));

    std::vector<Register> regs;
    for (std::size_t k = 0; k < st.registers.size(); ++k)
        if (std::find(drop.begin(), drop.end(), k) == drop.end()) regs.push_back(st.registers[k]);
    st.registers = std::move(regs);
    st.amplitudes = std::move(kept);
}

inline void transmit(BipartiteState& st, const TransmitStep& step) {
    std::size_t k = st.reg_index(step.name);
    if (st.registers[k].owner != step.from) fail(Errc::shape_mismatch, "transmit from wrong party");
    if (ceil_log2_int(st.registers[k].dim) != step.qubits)
        fail(Errc::shape_mismatch, "transmit qubit count mismatch");
    st.registers[k].owner = step.to;
    st.comm_cost += step.qubits;
}

// On control value i the joint (C1, C2) support is {(s,s)}; the step's
// unitary is a Gram-Schmidt completion of the prepared column inside that
// support span and the identity outside it, so it factors exactly into an
// m x m block per control value.
inline void controlled_prepare(BipartiteState& st, const ControlledPrepareStep& step) {
    std::size_t kc = st.reg_index(step.control);
    std::size_t k1 = st.reg_index(step.targets[0]);
    std::size_t k2 = st.reg_index(step.targets[1]);
    std::int64_t dim_t = std::int64_t{1} << step.qubits;
    for (std::size_t k : {kc, k1, k2})
        if (st.registers[k].owner != step.owner)
            fail(Errc::shape_mismatch, "controlled prepare touches foreign register");
    if (st.registers[k1].dim != dim_t || st.registers[k2].dim != dim_t)
        fail(Errc::shape_mismatch, "controlled prepare target dimension mismatch");
    std::int64_t nc = st.registers[kc].dim;
    if (static_cast<std::int64_t>(step.table.size()) != nc)
        fail(Errc::shape_mismatch, "prepare table does not cover the control register");

    std::vector<std::int64_t> strides = st.strides();
    std::int64_t sc = strides[kc];
    std::int64_t spair = strides[k1] + strides[k2];

    std::vector<std::vector<std::int64_t>> supports(static_cast<std::size_t>(nc));
    std::vector<Eigen::MatrixXcd> blocks(static_cast<std::size_t>(nc));
    for (std::int64_t i = 0; i < nc; ++i) {
        const PrepRow& row = step.table[static_cast<std::size_t>(i)];
        if (row.control != i) fail(Errc::shape_mismatch, "prepare table rows out of order");
        if (row.entries.empty()) fail(Errc::non_unitary_step, "empty prepare column");
        Eigen::Index m = static_cast<Eigen::Index>(row.entries.size());
        Eigen::VectorXcd v(m);
        double n2 = 0.0;
        std::int64_t prev = -1;
        auto& sup = supports[static_cast<std::size_t>(i)];
        for (Eigen::Index t = 0; t < m; ++t) {
            const PrepEntry& e = row.entries[static_cast<std::size_t>(t)];
            if (e.s <= prev || e.s >= dim_t)
                fail(Errc::shape_mismatch, "prepare support not strictly increasing");
            prev = e.s;
            if (!(e.num > 0.0) || !(e.den > 0.0))
                fail(Errc::non_unitary_step, "nonpositive prepare amplitude");
            double a2 = e.num / e.den;
            v(t) = std::sqrt(a2);
            n2 += a2;
            sup.push_back(e.s * spair);
        }
        if (std::abs(n2 - 1.0) > tol::prep_norm)
            fail(Errc::non_unitary_step, "prepare column norm differs from 1");

        // Column 0 is the prepared vector; the rest complete it from the
        // standard basis. v(0) > 0, so no step degenerates.
        Eigen::MatrixXcd mblk = Eigen::MatrixXcd::Zero(m, m);
        mblk.col(0) = v;
        for (Eigen::Index t = 1; t < m; ++t) {
            Eigen::VectorXcd w = Eigen::VectorXcd::Zero(m);
            w(t) = 1.0;
            for (Eigen::Index c = 0; c < t; ++c) w -= mblk.col(c) * (mblk.col(c).adjoint() * w)(0);
            double nw = w.norm();
            if (nw < 1e-9) throw std::logic_error("prepare completion degenerated");
            mblk.col(t) = w / nw;
        }
        if (step.adjoint) mblk = mblk.adjoint().eval();
        blocks[static_cast<std::size_t>(i)] = std::move(mblk);
    }

    std::vector<std::int64_t> odims, ostrides;
    for (std::size_t k = 0; k < st.registers.size(); ++k)
        if (k != kc && k != k1 && k != k2) {
            odims.push_back(st.registers[k].dim);
            ostrides.push_back(strides[k]);
        }
    detail::for_each_offset(odims, ostrides, [&](std::int64_t off) {
        for (std::int64_t i = 0; i < nc; ++i) {
            const auto& sup = supports[static_cast<std::size_t>(i)];
            const auto& mblk = blocks[static_cast<std::size_t>(i)];
            std::int64_t base = off + i * sc;
            Eigen::VectorXcd x(static_cast<Eigen::Index>(sup.size()));
            for (std::size_t t = 0; t < sup.size(); ++t)
                x(static_cast<Eigen::Index>(t)) = st.amplitudes[static_cast<std::size_t>(base + sup[t])];
            Eigen::VectorXcd y = mblk * x;
            for (std::size_t t = 0; t < sup.size(); ++t)
                st.amplitudes[static_cast<std::size_t>(base + sup[t])] = y(static_cast<Eigen::Index>(t));
        }
    });
}

inline std::int64_t flatten(const std::vector<std::int64_t>& digits,
                            const std::vector<std::int64_t>& dims) {
    std::int64_t f = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (digits[k] < 0 || digits[k] >= dims[k])
            fail(Errc::out_of_domain, "relabel tuple outside its dimensions");
        f = f * dims[k] + digits[k];
    }
    return f;
}

inline void relabel(BipartiteState& st, const RelabelStep& step) {
    auto resolve = [&](const std::vector<std::string>& names, Party owner,
                       const std::vector<std::int64_t>& dims) {
        std::vector<std::size_t> idx;
        if (names.empty()) return idx;
        if (names.size() != dims.size())
            fail(Errc::shape_mismatch, "relabel input count differs from its shape");
        for (std::size_t k = 0; k < names.size(); ++k) {
            std::size_t r = st.reg_index(names[k]);
            if (st.registers[r].owner != owner)
                fail(Errc::shape_mismatch, "relabel touches foreign register");
            if (st.registers[r].dim != dims[k])
                fail(Errc::shape_mismatch, "relabel input dimension mismatch");
            idx.push_back(r);
        }
        return idx;
    };
    std::vector<std::size_t> ain = resolve(step.a_inputs, Party::A, step.in_dims);
    std::vector<std::size_t> bin = resolve(step.b_inputs, Party::B, step.in_dims);
    if (!step.a_outputs.empty() && step.a_outputs.size() != step.out_dims.size())
        fail(Errc::shape_mismatch, "relabel output count differs from its shape");
    if (!step.b_outputs.empty() && step.b_outputs.size() != step.out_dims.size())
        fail(Errc::shape_mismatch, "relabel output count differs from its shape");

    std::map<std::int64_t, std::int64_t> fwd;
    std::set<std::int64_t> image;
    for (const auto& pr : step.pairs) {
        if (pr.first.size() != step.in_dims.size() || pr.second.size() != step.out_dims.size())
            fail(Errc::out_of_domain, "relabel pair arity mismatch");
        std::int64_t fi = flatten(pr.first, step.in_dims);
        std::int64_t fo = flatten(pr.second, step.out_dims);
        if (!fwd.emplace(fi, fo).second) fail(Errc::out_of_domain, "duplicate relabel input");
        if (!image.insert(fo).second) fail(Errc::out_of_domain, "relabel is not injective");
    }

    // New register list: outputs take the position of each side's first input.
    std::vector<Register> regs;
    std::vector<std::int64_t> consumed(st.registers.size(), 0);
    for (std::size_t k : ain) consumed[k] = 1;
    for (std::size_t k : bin) consumed[k] = 2;
    for (std::size_t k = 0; k < st.registers.size(); ++k) {
        if (!consumed[k]) {
            regs.push_back(st.registers[k]);
            continue;
        }
        bool is_a = consumed[k] == 1;
        if ((is_a && !ain.empty() && k == ain[0]) || (!is_a && !bin.empty() && k == bin[0])) {
            const auto& names = is_a ? step.a_outputs : step.b_outputs;
            for (std::size_t t = 0; t < names.size(); ++t)
                regs.push_back({names[t], step.out_dims[t], is_a ? Party::A : Party::B});
        }
    }
    BipartiteState ns;
    ns.registers = std::move(regs);
    ns.comm_cost = st.comm_cost;
    ns.subnormalized = st.subnormalized;
    if (ns.dim() > state_dim_cap) fail(Errc::too_large, "relabel exceeds the dimension cap");
    ns.amplitudes.assign(static_cast<std::size_t>(ns.dim()), cplx{0.0, 0.0});
    std::vector<std::int64_t> nstrides = ns.strides();

    // Offsets in the new layout: carried registers keep their digit, mapped
    // tuples land on the output registers.
    std::vector<std::int64_t> ostrides = st.strides();
    std::vector<std::int64_t> carry_stride(st.registers.size(), -1);
    for (std::size_t k = 0; k < st.registers.size(); ++k)
        if (!consumed[k]) carry_stride[k] = nstrides[ns.reg_index(st.registers[k].name)];
    auto out_offset = [&](bool is_a, std::int64_t flat) {
        const auto& names = is_a ? step.a_outputs : step.b_outputs;
        std::int64_t off = 0;
        for (std::size_t t = names.size(); t-- > 0;) {
            std::int64_t d = step.out_dims[t];
            off += (flat % d) * nstrides[ns.reg_index(names[t])];
            flat /= d;
        }
        return off;
    };

    double dev2 = 0.0;
    for (std::size_t f = 0; f < st.amplitudes.size(); ++f) {
        if (st.amplitudes[f] == cplx{0.0, 0.0}) continue;
        std::int64_t nf = 0;
        for (std::size_t k = 0; k < st.registers.size(); ++k)
            if (!consumed[k])
                nf += ((static_cast<std::int64_t>(f) / ostrides[k]) % st.registers[k].dim) *
                      carry_stride[k];
        bool dead = false;
        for (bool is_a : {true, false}) {
            const auto& idx = is_a ? ain : bin;
            if (idx.empty()) continue;
            std::int64_t flat = 0;
            for (std::size_t k : idx)
                flat = flat * st.registers[k].dim +
                       (static_cast<std::int64_t>(f) / ostrides[k]) % st.registers[k].dim;
            auto it = fwd.find(flat);
            if (it == fwd.end()) {
                dev2 += std::norm(st.amplitudes[f]);
                dead = true;
                break;
            }
            nf += out_offset(is_a, it->second);
        }
        if (!dead) ns.amplitudes[static_cast<std::size_t>(nf)] = st.amplitudes[f];
    }
    if (std::sqrt(dev2) > tol::discard)
        fail(Errc::discard_nonzero,
             "amplitude outside the relabel domain: " + format_double17(std::sqrt(dev2)));
    st = std::move(ns);
}

} // namespace detail

inline BipartiteState run_protocol(const BipartiteState& input, const ConversionProtocol& p) {
    BipartiteState st = input;
    for (const auto& step : p.steps) {
        if (const auto* a = std::get_if<AppendStep>(&step))
            detail::append_registers(st, a->owner, a->names, a->qubits);
        else if (const auto* d = std::get_if<DiscardStep>(&step))
            detail::discard_registers(st, d->owner, d->names, d->qubits);
        else if (const auto* c = std::get_if<ControlledPrepareStep>(&step))
            detail::controlled_prepare(st, *c);
        else if (const auto* t = std::get_if<TransmitStep>(&step))
            detail::transmit(st, *t);
        else if (const auto* r = std::get_if<RelabelStep>(&step))
            detail::relabel(st, *r);
    }
    return st;
}

// --- communication unitaries ---

struct LocalUnitary {
    Party owner;
    Eigen::MatrixXcd matrix; // over the owner's registers in list order, last fastest
};

struct MoveRegister {
    std::string name;
    Party from;
    Party to;
};

struct CommUnitary {
    std::vector<std::variant<LocalUnitary, MoveRegister>> ops;
};

inline BipartiteState apply_comm_unitary(const BipartiteState& input, const CommUnitary& u) {
    BipartiteState st = input;
    for (const auto& op : u.ops) {
        if (const auto* mv = std::get_if<MoveRegister>(&op)) {
            std::size_t k = st.reg_index(mv->name);
            if (st.registers[k].owner != mv->from)
                fail(Errc::shape_mismatch, "move from wrong party");
            st.registers[k].owner = mv->to;
            st.comm_cost += ceil_log2_int(st.registers[k].dim);
            continue;
        }
        const LocalUnitary& lu = std::get<LocalUnitary>(op);
        std::vector<std::size_t> own;
        for (std::size_t k = 0; k < st.registers.size(); ++k)
            if (st.registers[k].owner == lu.owner) own.push_back(k);
        std::int64_t m = 1;
        for (std::size_t k : own) m *= st.registers[k].dim;
        if (lu.matrix.rows() != m || lu.matrix.cols() != m)
            fail(Errc::shape_mismatch, "local unitary dimension mismatch");
        double uerr = (lu.matrix.adjoint() * lu.matrix -
                       Eigen::MatrixXcd::Identity(lu.matrix.rows(), lu.matrix.cols()))
                          .cwiseAbs()
                          .maxCoeff();
        if (uerr > tol::norm) fail(Errc::non_unitary_step, "local operation is not unitary");

        std::vector<std::int64_t> strides = st.strides();
        std::vector<std::int64_t> pdims = {}, pstrides = {};
        for (std::size_t k : own) {
            pdims.push_back(st.registers[k].dim);
            pstrides.push_back(strides[k]);
        }
        std::vector<std::int64_t> poff;
        poff.reserve(static_cast<std::size_t>(m));
        detail::for_each_offset(pdims, pstrides, [&](std::int64_t o) { poff.push_back(o); });

        std::vector<std::int64_t> odims, ostrides;
        for (std::size_t k = 0; k < st.registers.size(); ++k)
            if (st.registers[k].owner != lu.owner) {
                odims.push_back(st.registers[k].dim);
                ostrides.push_back(strides[k]);
            }
        Eigen::VectorXcd x(m), y(m);
        detail::for_each_offset(odims, ostrides, [&](std::int64_t off) {
            for (std::int64_t p = 0; p < m; ++p)
                x(p) = st.amplitudes[static_cast<std::size_t>(off + poff[static_cast<std::size_t>(p)])];
            y = lu.matrix * x;
            for (std::int64_t p = 0; p < m; ++p)
                st.amplitudes[static_cast<std::size_t>(off + poff[static_cast<std::size_t>(p)])] = y(p);
        });
    }
    return st;
}

// --- bound checks ---

struct InnerProductBound {
    double lhs;
    double rhs;
    std::size_t sr;
    double lambda_max;
    double nu_max;
    bool holds;
};

// |<psi|nu>| <= SR(psi) * sqrt(lambda_max(psi) * lambda_max(nu)).
inline InnerProductBound check_innerprod_bound(const BipartiteState& psi, const BipartiteState& nu,
                                               double rank_tol = tol::rank) {
    SchmidtResult sp = schmidt_coefficients(psi, rank_tol);
    SchmidtResult sn = schmidt_coefficients(nu, rank_tol);
    InnerProductBound r{};
    r.lhs = fidelity(psi, nu);
    r.sr = sp.rank;
    r.lambda_max = sp.spectrum.front();
    r.nu_max = sn.spectrum.front();
    r.rhs = static_cast<double>(sp.rank) * std::sqrt(r.lambda_max * r.nu_max);
    r.holds = r.lhs <= r.rhs + tol::dist;
    return r;
}

struct CommInnerProductBound {
    double lhs;
    double rhs;
    double q;
    std::size_t sr_psi;
    std::size_t sr_nu;
    std::size_t sr_out;
    double lambda_max;
    double nu_max;
    double out_max;
    bool holds;
    bool sr_growth_ok;    // SR(U nu) <= 2^q SR(nu)
    bool coeff_growth_ok; // lambda_max(U nu) <= 2^q lambda_max(nu)
};

// |<psi|U|nu>| <= 2^(3q/2) * SR(psi) * sqrt(lambda_max(psi) * lambda_max(nu))
// for a protocol U that moves q qubits, plus the growth facts behind it.
inline CommInnerProductBound check_comm_innerprod_bound(const BipartiteState& psi,
                                                        const BipartiteState& nu,
                                                        const CommUnitary& u,
                                                        double rank_tol = tol::rank) {
    BipartiteState out = apply_comm_unitary(nu, u);
    SchmidtResult sp = schmidt_coefficients(psi, rank_tol);
    SchmidtResult sn = schmidt_coefficients(nu, rank_tol);
    SchmidtResult so = schmidt_coefficients(out, rank_tol);
    CommInnerProductBound r{};
    r.q = out.comm_cost - nu.comm_cost;
    r.lhs = fidelity(psi, out);
    r.sr_psi = sp.rank;
    r.sr_nu = sn.rank;
    r.sr_out = so.rank;
    r.lambda_max = sp.spectrum.front();
    r.nu_max = sn.spectrum.front();
    r.out_max = so.spectrum.front();
    r.rhs = std::exp2(1.5 * r.q) * static_cast<double>(sp.rank) * std::sqrt(r.lambda_max * r.nu_max);
    r.holds = r.lhs <= r.rhs + tol::dist;
    r.sr_growth_ok =
        static_cast<double>(r.sr_out) <= std::exp2(r.q) * static_cast<double>(r.sr_nu) + 0.5;
    r.coeff_growth_ok = r.out_max <= std::exp2(r.q) * r.nu_max + tol::dist;
    return r;
}

} // namespace schflow
