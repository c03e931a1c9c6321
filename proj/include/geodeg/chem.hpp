#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace geodeg::chem {

enum class BondOrder { single, double_, triple, aromatic };

struct Atom {
    std::string element;   // B, C, N, O, P, S, F, Cl, Br, I, H
    bool aromatic = false;
    int formal_charge = 0;
    int index = 0;
};

struct Bond {
    int a = 0, b = 0;  // atom indices, a != b
    BondOrder order = BondOrder::single;
};

// Heavy-atom molecular graph; implicit hydrogens are not materialized.
struct MolecularGraph {
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;

    std::vector<std::vector<int>> adjacency() const;
};

enum class HyperedgeKind { bond, ring };

struct Hyperedge {
    std::vector<int> members;  // sorted atom indices, >= 2 of them
    HyperedgeKind kind = HyperedgeKind::bond;
    BondOrder order = BondOrder::single;  // meaningful when kind == bond
    int ring_size = 0;                    // meaningful when kind == ring
};

struct MolecularHypergraph {
    std::vector<Atom> atoms;
    std::vector<Hyperedge> hyperedges;
};

struct ParseError : std::runtime_error {
    size_t offset;  // byte offset into the SMILES text
    ParseError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Parses the supported SMILES subset: organic-subset atoms, bracket atoms
// with charge and H counts, bonds - = # :, ring closures (digits and %nn),
// parenthesised branches, lowercase aromatics. No stereo, no isotopes, no
// dot-separated fragments. Atom indices follow order of first appearance.
MolecularGraph parse_smiles(const std::string& text);

// Writes a SMILES string for the graph (DFS spanning tree + ring closures).
// Used by the round-trip property check; output stays within the subset.
std::string write_smiles(const MolecularGraph& g);

// Minimum cycle basis, deterministic order (by size, then lexicographic
// member indices). Acyclic graphs give an empty list.
std::vector<std::vector<int>> perceive_rings(const MolecularGraph& g);

// Basis cycles become ring hyperedges; bonds not covered by any basis cycle
// become bond hyperedges.
MolecularHypergraph to_hypergraph(const MolecularGraph& g);

// Exact isomorphism: atom bijection preserving element, aromaticity, charge
// and hyperedge structure. Backtracking gated by an invariant hash.
bool hypergraph_isomorphic(const MolecularHypergraph& h1, const MolecularHypergraph& h2);

inline constexpr int kHyperedgeFeatureDim = 16;

// Deterministic per-hyperedge descriptor:
//   [0] is_ring, [1] arity/8, [2..5] bond-order one-hot, [6] aromatic flag,
//   [7..14] member-element histogram hashed into 8 buckets (counts/arity),
//   [15] reserved (zero).
std::array<double, kHyperedgeFeatureDim> hyperedge_features(const MolecularHypergraph& h,
                                                            const Hyperedge& e);

}  // namespace geodeg::chem
