#pragma once

#include "plastic_shell/mesh.hpp"

namespace plastic_shell {

// Deterministic benchmark meshes. All are consistently oriented; closed ones
// have outward normals.

/// Flat nx x ny grid of quads split along one diagonal in the z = 0 plane,
/// spanning [0, width] x [0, height]: (nx+1)(ny+1) vertices, 2 nx ny triangles.
TriangleMesh plane_grid(int nx, int ny, double width = 1.0, double height = 1.0);

/// Subdivided icosahedron projected to the sphere; 3 levels give 642 vertices
/// and 1280 triangles.
TriangleMesh icosphere(int subdivisions, double radius = 1.0);

/// Open tube along z with `around` segments around and `along` segments along.
TriangleMesh cylinder(int around, int along, double radius = 1.0, double length = 1.0);

TriangleMesh torus(int major_segments, int minor_segments, double major_radius = 1.0, double minor_radius = 0.3);

/// Flat disk in z = 0 made of concentric rings around a centre vertex.
TriangleMesh disk(int rings, int segments, double radius = 1.0);

}  // namespace plastic_shell
