import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="cantor-normal",
    version="0.3.0",
    description="Normality of Q-Cantor series expansions: constructions, counting and Diophantine solvers.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=['tests', 'examples', 'examples.*']),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    install_requires=['numpy', 'pandas', 'scipy', 'tqdm'],
    entry_points={'console_scripts': ['cantor=cantor_normal.cli:main']},
    include_package_data=True,
    python_requires='>=3.7',
)
