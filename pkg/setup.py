import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

requireds = ["torch", "numpy>=1.21", "scipy", "PyYAML", "prettytable", "tqdm", "joblib", "pandas"]

setuptools.setup(
    name='maskbook',
    version='0.1.0',
    install_requires=requireds,
    extras_require={'test': ['pytest']},
    description="Codebook-based complex time-frequency masks: oracle studies, EM codebooks, unfolded MISI",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(include=['maskbook', 'maskbook.*']),
    python_requires='>=3.8',
    classifiers=[
         "Programming Language :: Python :: 3",
         "Operating System :: OS Independent",
    ],
    entry_points={
        "console_scripts": [
            "maskbook=maskbook.main:main",
        ],
    },
)
